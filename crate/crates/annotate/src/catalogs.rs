//! Coarse materials, fine-grained catalogs and the permitted material-model
//! combinations per coarse material.

use simready_core::BehaviorType;

pub const COARSE_MATERIALS: [&str; 8] = [
    "ceramic", "fabric", "leather", "metal", "plant", "plastic", "soil", "wood",
];

const FABRIC: [&str; 8] = [
    "cotton",
    "wool",
    "polyester",
    "silk",
    "denim",
    "spandex",
    "linen",
    "rayon",
];

const LEATHER: [&str; 8] = [
    "full-grain leather",
    "top-grain leather",
    "genuine leather",
    "nubuck leather",
    "suede",
    "patent leather",
    "bonded leather",
    "faux leather",
];

const PLASTIC: [&str; 12] = [
    "low-density polyethylene",
    "high-density polyethylene",
    "polyethylene terephthalate",
    "polypropylene",
    "rigid polyvinyl chloride",
    "flexible polyvinyl chloride",
    "polystyrene",
    "polycarbonate",
    "acrylonitrile butadiene styrene",
    "polyamide",
    "polyurethane",
    "thermoplastic elastomers",
];

pub fn is_coarse_material(name: &str) -> bool {
    COARSE_MATERIALS.contains(&name)
}

/// Ordered fine-grained options, for the coarse materials that have them.
pub fn fine_catalog(coarse: &str) -> Option<&'static [&'static str]> {
    match coarse {
        "fabric" => Some(&FABRIC),
        "leather" => Some(&LEATHER),
        "plastic" => Some(&PLASTIC),
        _ => None,
    }
}

/// Behavior types a coarse material may be assigned.
pub fn allowed_behaviors(coarse: &str) -> Option<&'static [BehaviorType]> {
    use BehaviorType::*;
    Some(match coarse {
        "ceramic" | "plastic" | "wood" => &[M1],
        "fabric" | "leather" => &[M0, M1],
        "metal" => &[M2],
        "plant" => &[M0],
        "soil" => &[M3],
        _ => return None,
    })
}

pub fn combo_allowed(coarse: &str, behavior: BehaviorType) -> bool {
    allowed_behaviors(coarse).is_some_and(|b| b.contains(&behavior))
}

/// Parameter keys a combination requires, in response order.
pub fn required_parameters(behavior: BehaviorType) -> &'static [&'static str] {
    match behavior {
        BehaviorType::M0 => &["E", "nu", "rho"],
        BehaviorType::M1 | BehaviorType::M2 => &["E", "nu", "sigma_y", "rho"],
        BehaviorType::M3 => &["E", "nu", "phi", "rho"],
    }
}
