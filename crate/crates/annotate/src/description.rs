use crate::catalogs::is_coarse_material;
use serde::{Deserialize, Serialize};
use simready_core::assets::PartInfo;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartDescription {
    pub name: String,
    pub coarse_material: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_material: Option<String>,
    /// Color word, e.g. "dark brown".
    pub color: String,
}

impl PartDescription {
    pub fn new(name: &str, coarse: &str, color: &str) -> Self {
        PartDescription {
            name: name.into(),
            coarse_material: coarse.into(),
            fine_material: None,
            color: color.into(),
        }
    }

    pub fn info(&self) -> PartInfo {
        PartInfo {
            name: self.name.clone(),
            coarse_material: self.coarse_material.clone(),
            fine_material: self.fine_material.clone(),
        }
    }
}

/// What the annotator is told about an object besides its rendered views.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectDescription {
    pub shape_name: String,
    pub parts: Vec<PartDescription>,
    /// Paths or URLs of rendered views.
    #[serde(default)]
    pub images: Vec<String>,
    /// Optional `.sra` asset with this part list; proxy geometry otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset_path: Option<String>,
}

impl ObjectDescription {
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if self.shape_name.trim().is_empty() {
            problems.push("shape name is empty".to_string());
        }
        if self.parts.is_empty() {
            problems.push("object has no parts".to_string());
        }
        for (i, p) in self.parts.iter().enumerate() {
            if p.name.trim().is_empty() {
                problems.push(format!("part {i} has no name"));
            }
            if !is_coarse_material(&p.coarse_material) {
                problems.push(format!(
                    "part `{}`: unknown coarse material `{}`",
                    p.name, p.coarse_material
                ));
            }
            if self.parts[..i].iter().any(|q| q.name == p.name) {
                problems.push(format!("part name `{}` is repeated", p.name));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    pub fn part(&self, name: &str) -> Option<&PartDescription> {
        self.parts.iter().find(|p| p.name == name)
    }

    pub fn part_mut(&mut self, name: &str) -> Option<&mut PartDescription> {
        self.parts.iter_mut().find(|p| p.name == name)
    }
}
