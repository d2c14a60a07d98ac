use std::collections::BTreeMap;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Legal-form tokens stripped from the end of institution names.
pub const DEFAULT_LEGAL_SUFFIXES: &[&str] = &[
    "s p a", "spa", "s r l", "srl", "s a s", "sas", "s n c", "snc", "s c a r l", "scarl",
    "s a", "inc", "ltd", "llc", "plc", "gmbh", "ag", "bv", "nv", "corp", "co",
];

/// Deterministic institution-name canonicalizer: case folding, diacritic
/// stripping, punctuation collapsing, legal-suffix removal, then an alias
/// lookup on the result.
#[derive(Debug, Clone)]
pub struct NameNormalizer {
    suffixes: Vec<Vec<String>>,
    aliases: BTreeMap<String, String>,
}

impl Default for NameNormalizer {
    fn default() -> Self {
        Self::new(DEFAULT_LEGAL_SUFFIXES.iter().copied())
    }
}

impl NameNormalizer {
    pub fn new<'a>(suffixes: impl IntoIterator<Item = &'a str>) -> Self {
        let mut suffixes: Vec<Vec<String>> = suffixes
            .into_iter()
            .map(|s| tokens(&fold(s)))
            .filter(|t| !t.is_empty())
            .collect();
        // longest first so "s p a" wins over "s a" style overlaps
        suffixes.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        suffixes.dedup();
        Self {
            suffixes,
            aliases: BTreeMap::new(),
        }
    }

    /// Registers `variant` as another spelling of `canonical`. Both sides are
    /// normalized before storage.
    pub fn with_alias(mut self, variant: &str, canonical: &str) -> Self {
        let v = self.normalize(variant);
        let c = self.normalize(canonical);
        self.aliases.insert(v, c);
        self
    }

    pub fn normalize(&self, raw: &str) -> String {
        let mut toks = tokens(&fold(raw));
        'strip: loop {
            for suffix in &self.suffixes {
                if toks.len() >= suffix.len() && toks[toks.len() - suffix.len()..] == suffix[..] {
                    toks.truncate(toks.len() - suffix.len());
                    continue 'strip;
                }
            }
            break;
        }
        toks.join(" ")
    }

    /// Normalized name with aliases resolved.
    pub fn canonical(&self, raw: &str) -> String {
        let n = self.normalize(raw);
        match self.aliases.get(&n) {
            Some(c) => c.clone(),
            None => n,
        }
    }
}

/// Canonical form of an institution name using the default suffix list.
pub fn normalize_institution_name(raw: &str) -> String {
    NameNormalizer::default().normalize(raw)
}

// Decompose, drop combining marks, lowercase; repeated because lowercasing
// or compatibility decomposition can each expose input for the other.
fn fold(raw: &str) -> String {
    let mut cur = raw.to_string();
    for _ in 0..8 {
        let next: String = cur
            .nfkd()
            .filter(|c| !is_combining_mark(*c))
            .flat_map(char::to_lowercase)
            .collect();
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

fn tokens(folded: &str) -> Vec<String> {
    folded
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn italian_university_name() {
        assert_eq!(
            normalize_institution_name("Università di Bologna "),
            "universita di bologna"
        );
    }

    #[test]
    fn legal_suffix_removed() {
        assert_eq!(normalize_institution_name("ACME S.p.A."), "acme");
        assert_eq!(normalize_institution_name("Foo Bar s.r.l"), "foo bar");
        let n = NameNormalizer::new(["s p a"]);
        assert_eq!(n.normalize("ACME S.p.A."), "acme");
        assert_eq!(n.normalize("ACME Ltd"), "acme ltd");
    }

    #[test]
    fn punctuation_collapses() {
        assert_eq!(
            normalize_institution_name("University of Venice “Ca' Foscari”"),
            "university of venice ca foscari"
        );
    }

    #[test]
    fn only_suffix_gives_empty() {
        assert_eq!(normalize_institution_name("S.p.A."), "");
        assert_eq!(normalize_institution_name("   "), "");
    }

    #[test]
    fn alias_resolution() {
        let n = NameNormalizer::default().with_alias("Politecnico di Milano", "Polytechnic of Milan");
        assert_eq!(n.canonical("POLITECNICO DI MILANO"), "polytechnic of milan");
        assert_eq!(n.canonical("Something else"), "something else");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn idempotent(s in "\\PC{0,40}") {
            let once = normalize_institution_name(&s);
            prop_assert_eq!(normalize_institution_name(&once), once);
        }

        #[test]
        fn insensitive_to_case_accents_and_padding(
            words in proptest::collection::vec("[a-z]{1,8}", 1..5),
            pad_l in "[ \t]{0,3}",
            pad_r in "[ \t]{0,3}",
        ) {
            let plain = words.join(" ");
            let shouted = format!("{pad_l}{}{pad_r}", plain.to_uppercase());
            let accented: String = plain
                .chars()
                .map(|c| match c { 'a' => 'à', 'e' => 'é', 'i' => 'ì', 'o' => 'ò', 'u' => 'ü', c => c })
                .collect();
            let a = normalize_institution_name(&plain);
            prop_assert_eq!(&normalize_institution_name(&shouted), &a);
            prop_assert_eq!(&normalize_institution_name(&accented), &a);
        }
    }
}
