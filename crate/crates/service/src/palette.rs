//! Color words from object descriptions to RGB albedo.

const NAMED: &[(&str, [u8; 3])] = &[
    ("black", [30, 30, 30]),
    ("white", [235, 235, 235]),
    ("grey", [128, 128, 128]),
    ("gray", [128, 128, 128]),
    ("silver", [192, 192, 192]),
    ("red", [200, 40, 40]),
    ("green", [60, 150, 60]),
    ("blue", [50, 90, 200]),
    ("yellow", [230, 200, 50]),
    ("orange", [235, 130, 40]),
    ("purple", [130, 60, 160]),
    ("pink", [235, 150, 180]),
    ("brown", [120, 75, 40]),
    ("beige", [220, 200, 160]),
    ("tan", [210, 180, 140]),
    ("gold", [212, 175, 55]),
    ("cream", [245, 235, 205]),
    ("navy", [30, 40, 100]),
    ("teal", [40, 130, 130]),
];

const FALLBACK: [u8; 3] = [150, 150, 150];

/// `#rrggbb`, a known color word, or the last known word of a phrase such as
/// "dark brown"; anything else is neutral grey.
pub fn color_from_name(name: &str) -> [f64; 3] {
    let rgb = parse_hex(name.trim())
        .or_else(|| {
            name.split(|c: char| !c.is_ascii_alphabetic())
                .rev()
                .find_map(|w| {
                    NAMED
                        .iter()
                        .find(|(n, _)| n.eq_ignore_ascii_case(w))
                        .map(|(_, c)| *c)
                })
        })
        .unwrap_or(FALLBACK);
    rgb.map(|c| c as f64 / 255.0)
}

fn parse_hex(s: &str) -> Option<[u8; 3]> {
    let hex = s.strip_prefix('#')?;
    if hex.len() != 6 {
        return None;
    }
    let byte = |i: usize| u8::from_str_radix(hex.get(i..i + 2)?, 16).ok();
    Some([byte(0)?, byte(2)?, byte(4)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_hex() {
        assert_eq!(color_from_name("#ff0000"), [1.0, 0.0, 0.0]);
        assert_eq!(color_from_name("Dark Brown"), color_from_name("brown"));
        assert_eq!(color_from_name("mauve"), FALLBACK.map(|c| c as f64 / 255.0));
        assert_eq!(
            color_from_name("#12345"),
            FALLBACK.map(|c| c as f64 / 255.0)
        );
    }
}
