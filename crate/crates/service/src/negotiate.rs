//! Accept-header matching: the first listed media type with an exact offer
//! wins; wildcards, q-values and anything unmatched fall back to the default.

pub fn negotiate<T: Copy>(accept: Option<&str>, offers: &[(&str, T)], default: T) -> T {
    let Some(accept) = accept else { return default };
    for entry in accept.split(',') {
        let media = entry.split(';').next().unwrap_or("").trim();
        if let Some((_, value)) = offers.iter().find(|(m, _)| m.eq_ignore_ascii_case(media)) {
            return *value;
        }
    }
    default
}

#[cfg(test)]
mod tests {
    use super::*;

    const OFFERS: [(&str, u8); 2] = [("text/turtle", 1), ("application/rdf+xml", 2)];

    #[test]
    fn first_exact_match_wins() {
        assert_eq!(negotiate(Some("application/rdf+xml, text/turtle"), &OFFERS, 0), 2);
        assert_eq!(negotiate(Some("text/html;q=0.9, TEXT/TURTLE;q=0.1"), &OFFERS, 0), 1);
    }

    #[test]
    fn wildcards_and_misses_use_the_default() {
        assert_eq!(negotiate(Some("*/*"), &OFFERS, 0), 0);
        assert_eq!(negotiate(Some("image/png"), &OFFERS, 0), 0);
        assert_eq!(negotiate(None, &OFFERS, 0), 0);
    }
}
