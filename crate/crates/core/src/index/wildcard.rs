/// An anchored glob over characters: `*` matches any run, `?` one character.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wildcard {
    chars: Vec<char>,
    literal_prefix: String,
    has_wildcards: bool,
}

impl Wildcard {
    /// Compiles a pattern. Matching is case-sensitive; callers lowercase both sides.
    pub fn new(pattern: &str) -> Self {
        let chars: Vec<char> = pattern.chars().collect();
        let literal_prefix = chars.iter().take_while(|c| !is_wild(**c)).collect();
        let has_wildcards = chars.iter().any(|c| is_wild(*c));
        Wildcard {
            chars,
            literal_prefix,
            has_wildcards,
        }
    }

    pub fn has_wildcards(&self) -> bool {
        self.has_wildcards
    }

    /// Text before the first wildcard; every match starts with it.
    pub fn literal_prefix(&self) -> &str {
        &self.literal_prefix
    }

    pub fn matches(&self, text: &str) -> bool {
        let t: Vec<char> = text.chars().collect();
        let p = &self.chars;
        let (mut pi, mut ti) = (0, 0);
        let mut star: Option<(usize, usize)> = None;
        while ti < t.len() {
            if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
                pi += 1;
                ti += 1;
            } else if pi < p.len() && p[pi] == '*' {
                star = Some((pi, ti));
                pi += 1;
            } else if let Some((sp, st)) = star {
                pi = sp + 1;
                ti = st + 1;
                star = Some((sp, st + 1));
            } else {
                return false;
            }
        }
        p[pi..].iter().all(|&c| c == '*')
    }
}

fn is_wild(c: char) -> bool {
    c == '*' || c == '?'
}
