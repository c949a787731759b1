use std::sync::LazyLock;

use regex::Regex;

static OPTION_K: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\boption\s*(\d+)").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(\d+)\b").unwrap());

/// Extracts a 1-based option index from a model response.
///
/// The first `Option k` (any case) with `k` in range wins; otherwise the
/// first standalone in-range integer. `None` means no answer and grades as
/// incorrect.
pub fn parse_option_answer(response: &str, option_count: usize) -> Option<usize> {
    let in_range = |k: usize| (1..=option_count).contains(&k);
    let first = |re: &Regex| {
        re.captures_iter(response)
            .filter_map(|c| c[1].parse::<usize>().ok())
            .find(|&k| in_range(k))
    };
    first(&OPTION_K).or_else(|| first(&INTEGER))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(parse_option_answer("Answer: Option 2", 4), Some(2));
        assert_eq!(parse_option_answer("option 3.", 4), Some(3));
        assert_eq!(parse_option_answer("I am not sure", 4), None);
    }

    #[test]
    fn range_and_fallback() {
        assert_eq!(parse_option_answer("Option 9", 4), None);
        assert_eq!(parse_option_answer("Option 9, no wait, Option 1", 4), Some(1));
        assert_eq!(parse_option_answer("The answer is 2", 4), Some(2));
        // labelled answer beats an earlier bare number
        assert_eq!(parse_option_answer("In 3 words: OPTION 4", 4), Some(4));
        // digits glued to letters are not standalone
        assert_eq!(parse_option_answer("5G is the answer", 5), None);
        assert_eq!(parse_option_answer("Option12", 12), Some(12));
    }
}
