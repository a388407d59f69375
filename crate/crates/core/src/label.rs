use std::fmt;

/// Track label `(birth_time, index)`.
///
/// The derived ordering is lexicographic on `(birth_time, index)`, which gives
/// every label set a canonical sorted form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub birth_time: u32,
    pub index: u32,
}

impl Label {
    pub const fn new(birth_time: u32, index: u32) -> Self {
        Self { birth_time, index }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.birth_time, self.index)
    }
}

pub(crate) fn format_label_set(labels: &[Label]) -> String {
    let parts: Vec<String> = labels.iter().map(ToString::to_string).collect();
    format!("{{{}}}", parts.join(","))
}
