//! Checks a parsed proposal against the object's parts, the permitted
//! combinations and the parameter ranges, and builds per-part materials.

use crate::catalogs::{allowed_behaviors, required_parameters};
use crate::description::ObjectDescription;
use crate::parse::ParsedProposal;
use serde::{Deserialize, Serialize};
use simready_core::assets::{
    MaterialParams, MAX_FRICTION_ANGLE, MAX_POISSON_RATIO, MAX_YOUNGS_MODULUS, MIN_YOUNGS_MODULUS,
};
use simready_core::BehaviorType;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    /// Any violation rejects the proposal.
    #[default]
    Strict,
    /// Out-of-range values are clamped into range and recorded.
    Lenient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub part: String,
    pub rule: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "part `{}` [{}]: {}", self.part, self.rule, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub part: String,
    pub parameter: String,
    pub original: f64,
    pub adjusted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidatedProposal {
    /// Material per part name.
    pub materials: BTreeMap<String, MaterialParams>,
    pub adjustments: Vec<Adjustment>,
    pub notes: Vec<String>,
}

pub fn parse_cid(cid: &str) -> Option<BehaviorType> {
    cid.trim()
        .trim_end_matches('.')
        .to_ascii_uppercase()
        .parse()
        .ok()
}

struct Checker<'a> {
    part: &'a str,
    mode: ValidationMode,
    violations: &'a mut Vec<Violation>,
    adjustments: &'a mut Vec<Adjustment>,
}

impl Checker<'_> {
    fn violate(&mut self, rule: &str, message: String) {
        self.violations.push(Violation {
            part: self.part.to_string(),
            rule: rule.to_string(),
            message,
        });
    }

    /// Range check; lenient mode clamps into `[lo, hi]` instead of failing.
    fn range(&mut self, key: &str, value: f64, lo: f64, hi: f64, unit: &str) -> f64 {
        if !value.is_finite() {
            self.violate("range", format!("{key} = {value} is not finite"));
            return value;
        }
        if (lo..=hi).contains(&value) {
            return value;
        }
        if self.mode == ValidationMode::Lenient {
            let adjusted = value.clamp(lo, hi);
            self.adjustments.push(Adjustment {
                part: self.part.to_string(),
                parameter: key.to_string(),
                original: value,
                adjusted,
            });
            return adjusted;
        }
        self.violate(
            "range",
            format!("{key} = {value}{unit} outside [{lo}, {hi}]"),
        );
        value
    }

    fn positive(&mut self, key: &str, value: f64) -> f64 {
        if !(value.is_finite() && value > 0.0) {
            self.violate("range", format!("{key} = {value} must be positive"));
        }
        value
    }
}

/// Accepts iff every part passes every check; otherwise returns all
/// violations found.
pub fn validate_proposal(
    desc: &ObjectDescription,
    proposal: &ParsedProposal,
    mode: ValidationMode,
) -> Result<ValidatedProposal, Vec<Violation>> {
    let mut violations = Vec::new();
    let mut adjustments = Vec::new();
    let mut notes = Vec::new();
    let mut materials = BTreeMap::new();

    for extra in proposal
        .parts
        .iter()
        .filter(|p| desc.part(&p.part).is_none())
    {
        match mode {
            ValidationMode::Strict => violations.push(Violation {
                part: extra.part.clone(),
                rule: "unknown part".into(),
                message: "the object has no part with this name".into(),
            }),
            ValidationMode::Lenient => notes.push(format!("ignored unknown part `{}`", extra.part)),
        }
    }

    for part in &desc.parts {
        let mut ck = Checker {
            part: &part.name,
            mode,
            violations: &mut violations,
            adjustments: &mut adjustments,
        };
        let Some(p) = proposal.part(&part.name) else {
            ck.violate("missing part", "no parameters were proposed".into());
            continue;
        };
        let Some(behavior) = parse_cid(&p.cid) else {
            ck.violate("combination", format!("unknown combination id `{}`", p.cid));
            continue;
        };
        let allowed = allowed_behaviors(&part.coarse_material).unwrap_or(&[]);
        if !allowed.contains(&behavior) {
            let names: Vec<&str> = allowed.iter().map(|b| b.as_str()).collect();
            ck.violate(
                "combination",
                format!(
                    "{behavior} is not permitted for {} (allowed: {})",
                    part.coarse_material,
                    names.join(", ")
                ),
            );
        }
        let required = required_parameters(behavior);
        let mut missing = false;
        for key in required {
            if !p.params.contains_key(*key) {
                ck.violate(
                    "required parameter",
                    format!("`{key}` is required for {behavior}"),
                );
                missing = true;
            }
        }
        for key in p.params.keys().filter(|k| !required.contains(&k.as_str())) {
            notes.push(format!(
                "part `{}`: `{key}` is not used by {behavior}",
                part.name
            ));
        }
        if missing {
            continue;
        }
        let get = |k: &str| p.params[k];
        let e = ck.range("E", get("E"), MIN_YOUNGS_MODULUS, MAX_YOUNGS_MODULUS, " Pa");
        let nu = ck.range("nu", get("nu"), 0.0, MAX_POISSON_RATIO, "");
        let rho = ck.positive("rho", get("rho"));
        let yield_stress = behavior
            .requires_yield_stress()
            .then(|| ck.positive("sigma_y", get("sigma_y")));
        let friction_angle = behavior
            .requires_friction_angle()
            .then(|| ck.range("phi", get("phi"), 0.0, MAX_FRICTION_ANGLE, " rad"));
        let m = MaterialParams {
            youngs_modulus: e,
            poisson_ratio: nu,
            yield_stress,
            friction_angle,
            density: rho,
            behavior,
        };
        if ck.violations.iter().all(|v| v.part != part.name) {
            debug_assert!(m.validate().is_ok(), "{m:?}");
            materials.insert(part.name.clone(), m);
        }
    }

    if violations.is_empty() {
        Ok(ValidatedProposal {
            materials,
            adjustments,
            notes,
        })
    } else {
        Err(violations)
    }
}
