//! Accuracy broken down by message author group.

use serde::{Deserialize, Serialize};

pub const OTHER_GROUP: &str = "other";

/// `(pattern, group)` pairs; `*` in a pattern matches any run of characters.
/// Matching is case-insensitive and the first matching pattern wins.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UserGroups {
    pub patterns: Vec<(String, String)>,
}

impl UserGroups {
    pub fn new(patterns: Vec<(String, String)>) -> Self {
        UserGroups { patterns }
    }

    pub fn group_of<'a>(&'a self, user: &str) -> &'a str {
        let user = user.to_lowercase();
        self.patterns
            .iter()
            .find(|(p, _)| glob_match(&p.to_lowercase(), &user))
            .map_or(OTHER_GROUP, |(_, g)| g.as_str())
    }

    /// Group names in report order, with the catch-all last.
    pub fn names(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for (_, g) in &self.patterns {
            if !out.contains(g) {
                out.push(g.clone());
            }
        }
        if !out.iter().any(|g| g == OTHER_GROUP) {
            out.push(OTHER_GROUP.to_string());
        }
        out
    }
}

fn glob_match(pattern: &str, text: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == text;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !text.starts_with(first) || text.len() < first.len() + last.len() || !text.ends_with(last) {
        return false;
    }
    let mut rest = &text[first.len()..text.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(pos) => rest = &rest[pos + mid.len()..],
            None => return false,
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub group: String,
    pub total: usize,
    pub correct: usize,
    /// Percent; 0 for an empty group.
    pub accuracy: f64,
}

/// Per-group accuracy from `(user, correct)` outcomes.
pub fn user_group_report<'a>(outcomes: impl IntoIterator<Item = (&'a str, bool)>, groups: &UserGroups) -> Vec<GroupAccuracy> {
    let names = groups.names();
    let mut tally = vec![(0usize, 0usize); names.len()];
    for (user, ok) in outcomes {
        let g = groups.group_of(user);
        let i = names.iter().position(|n| n == g).expect("group listed");
        tally[i].0 += 1;
        tally[i].1 += usize::from(ok);
    }
    names
        .into_iter()
        .zip(tally)
        .map(|(group, (total, correct))| GroupAccuracy {
            group,
            total,
            correct,
            accuracy: if total == 0 { 0.0 } else { 100.0 * correct as f64 / total as f64 },
        })
        .collect()
}

pub fn group_report_csv(rows: &[GroupAccuracy]) -> String {
    let mut out = String::from("group,total,correct,accuracy\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.group, r.total, r.correct, r.accuracy));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn globbing() {
        assert!(glob_match("511*", "511ny"));
        assert!(glob_match("*traffic*", "totaltrafficnyc"));
        assert!(!glob_match("511*", "x511"));
        assert!(glob_match("a*b*c", "abc"));
        assert!(!glob_match("ab*ba", "aba"));
    }

    #[test]
    fn two_groups_hand_count() {
        let groups = UserGroups::new(vec![("511*".into(), "511".into())]);
        let mut outcomes = Vec::new();
        for i in 0..10 {
            outcomes.push(("511NY", true));
            outcomes.push(("someone", i < 5));
        }
        let r = user_group_report(outcomes, &groups);
        assert_eq!(r[0].accuracy, 100.0);
        assert_eq!(r[1].group, "other");
        assert_eq!(r[1].accuracy, 50.0);
    }

    #[test]
    fn single_bucket_equals_overall() {
        let r = user_group_report([("a", true), ("b", false), ("c", true), ("d", true)], &UserGroups::default());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].accuracy, 75.0);
    }
}
