//! Scenarios shipped with the binary.

pub const QUAD3: &str = include_str!("../scenarios/quad3.scn");
pub const OSNR10: &str = include_str!("../scenarios/osnr10.scn");
pub const ROBOTS5: &str = include_str!("../scenarios/robots5.scn");

/// `(name, description, text)` for every built-in.
pub const ALL: [(&str, &str, &str); 3] = [
    ("quad3", "three quadratic players with a shared budget, distributed feedback", QUAD3),
    ("osnr10", "ten-channel optical power control, distributed feedback", OSNR10),
    ("robots5", "five flexible robots following a leader velocity, full information", ROBOTS5),
];

pub fn text(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _, _)| *n == name).map(|(_, _, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    ALL.iter().map(|(n, _, _)| *n)
}
