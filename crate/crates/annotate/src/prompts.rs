//! Prompt builders. Output is a pure function of the inputs.

use crate::catalogs::fine_catalog;
use crate::chat::ChatMessage;
use crate::description::{ObjectDescription, PartDescription};
use crate::AnnotateError;

/// Raw templates with their bracketed placeholders.
pub const FINE_MATERIAL_TEMPLATE: &str = include_str!("templates/fine_material.txt");
pub const PARAMETER_TEMPLATE: &str = include_str!("templates/parameters.txt");
pub const FEEDBACK_TEMPLATE: &str = include_str!("templates/feedback.txt");

/// Which material word to use when describing a part.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaterialWording {
    Coarse,
    /// The fine-grained name when known, else the coarse one.
    FinestKnown,
}

/// `a red fabric cushion, a brown wood frame, and a black metal leg`
pub fn part_material_description(parts: &[PartDescription], wording: MaterialWording) -> String {
    let phrase = |p: &PartDescription| {
        let material = match (wording, &p.fine_material) {
            (MaterialWording::FinestKnown, Some(fine)) => fine.as_str(),
            _ => p.coarse_material.as_str(),
        };
        format!("a {} {} {}", p.color, material, p.name)
    };
    match parts {
        [] => String::new(),
        [only] => phrase(only),
        [init @ .., last] => {
            let mut s: String = init.iter().map(|p| phrase(p) + ", ").collect();
            s.push_str("and ");
            s.push_str(&phrase(last));
            s
        }
    }
}

/// Parts that still need a fine-grained material, grouped by coarse material
/// in first-appearance order. Each group gets its own fine-material prompt.
pub fn fine_material_groups(desc: &ObjectDescription) -> Vec<(String, Vec<String>)> {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for p in &desc.parts {
        if p.fine_material.is_some() || fine_catalog(&p.coarse_material).is_none() {
            continue;
        }
        match groups.iter_mut().find(|(c, _)| *c == p.coarse_material) {
            Some((_, names)) => names.push(p.name.clone()),
            None => groups.push((p.coarse_material.clone(), vec![p.name.clone()])),
        }
    }
    groups
}

/// First-round prompt asking for fine-grained materials of `targets`, which
/// must share one coarse material that has a catalog.
pub fn build_fine_material_prompt(
    desc: &ObjectDescription,
    targets: &[&str],
) -> Result<String, AnnotateError> {
    let first = targets
        .first()
        .ok_or_else(|| AnnotateError::Prompt("no target parts".into()))?;
    let mut coarse = None;
    for name in targets {
        let part = desc
            .part(name)
            .ok_or_else(|| AnnotateError::Prompt(format!("unknown part `{name}`")))?;
        match coarse {
            None => coarse = Some(part.coarse_material.as_str()),
            Some(c) if c != part.coarse_material => {
                return Err(AnnotateError::Prompt(format!(
                    "parts `{first}` and `{name}` have different coarse materials"
                )))
            }
            _ => {}
        }
    }
    let coarse = coarse.unwrap();
    let catalog = fine_catalog(coarse).ok_or_else(|| {
        AnnotateError::Prompt(format!(
            "coarse material `{coarse}` has no fine-grained catalog"
        ))
    })?;
    Ok(FINE_MATERIAL_TEMPLATE
        .replace("[SHAPE NAME]", &desc.shape_name)
        .replace("[N_P]", &desc.parts.len().to_string())
        .replace(
            "[PART-MATERIAL DESCRIPTION]",
            &part_material_description(&desc.parts, MaterialWording::Coarse),
        )
        .replace("[A LIST OF PART NAMES]", &targets.join(", "))
        .replace("[COARSE-GRAINED MATERIAL NAME]", coarse)
        .replace(
            "[A LIST OF AVAILABLE FINE-GRAINED MATERIAL NAMES]",
            &catalog.join(", "),
        ))
}

/// Second-round prompt asking for material models and parameters.
pub fn build_parameter_prompt(desc: &ObjectDescription) -> String {
    PARAMETER_TEMPLATE
        .replace("[SHAPE NAME]", &desc.shape_name)
        .replace("[N_P]", &desc.parts.len().to_string())
        .replace(
            "[PART-MATERIAL DESCRIPTION]",
            &part_material_description(&desc.parts, MaterialWording::FinestKnown),
        )
}

/// Phrase completing "when the object ... in the simulator".
pub fn test_case_description(scenario: &str) -> Option<&'static str> {
    Some(match scenario {
        "drop" => "is dropped from a certain height",
        "throw" => "is thrown in a certain direction",
        "tilt" => "is placed on a tilted surface",
        "drag" => "is dragged by one of its parts",
        "wind" => "is blown by a gust of wind",
        _ => return None,
    })
}

/// The second user message of a feedback round.
pub fn build_feedback_prompt(scenario: &str, comment: &str) -> Result<String, AnnotateError> {
    let case = test_case_description(scenario)
        .ok_or_else(|| AnnotateError::Prompt(format!("unknown test case `{scenario}`")))?;
    let comment = comment.trim().trim_end_matches('.');
    if comment.is_empty() {
        return Err(AnnotateError::Prompt("expert comment is empty".into()));
    }
    Ok(FEEDBACK_TEMPLATE
        .replace("[TEST CASE DESCRIPTION]", case)
        .replace("[USER COMMENT]", comment))
}

/// user (original parameter prompt) / assistant (its answer) / user (feedback).
pub fn build_feedback_messages(
    parameter_prompt: &str,
    images: &[String],
    prior_response: &str,
    scenario: &str,
    comment: &str,
) -> Result<[ChatMessage; 3], AnnotateError> {
    Ok([
        ChatMessage::user(parameter_prompt).with_images(images),
        ChatMessage::assistant(prior_response),
        ChatMessage::user(&build_feedback_prompt(scenario, comment)?),
    ])
}
