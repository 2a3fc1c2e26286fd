/// Normal form used for syntactic equivalence.
///
/// Case-folds, spells out `&`, turns `(),.-/` into spaces and sorts the
/// remaining tokens, so "USA (Florida)" and "Florida, USA" coincide.
pub fn normalize_term(term: &str) -> String {
    let folded = term.to_lowercase().replace('&', " and ");
    let spaced: String = folded
        .chars()
        .map(|c| match c {
            '(' | ')' | ',' | '.' | '-' | '/' => ' ',
            c => c,
        })
        .collect();
    let mut tokens: Vec<&str> = spaced.split_whitespace().collect();
    tokens.sort_unstable();
    tokens.join(" ")
}

pub fn syntactic_equivalent(a: &str, b: &str) -> bool {
    normalize_term(a) == normalize_term(b)
}
