/// Lowercases, drops possessive `'s` and other apostrophes, removes thousands
/// separators, and turns remaining punctuation into spaces. `.` and `-`
/// between digits survive so decimals and ISO dates stay intact.
pub fn normalize(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let is_digit = |i: Option<usize>| i.and_then(|i| chars.get(i)).is_some_and(|c| c.is_ascii_digit());
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let prev = i.checked_sub(1);
        let next = Some(i + 1);
        match c {
            '\'' | '\u{2019}' => {
                let s_follows = chars.get(i + 1).is_some_and(|n| n.eq_ignore_ascii_case(&'s'));
                let word_ends = chars.get(i + 2).is_none_or(|n| !n.is_alphanumeric());
                if s_follows && word_ends {
                    i += 1;
                }
            }
            ',' if is_digit(prev) && is_digit(next) => {}
            '.' | '-' if is_digit(prev) && is_digit(next) => out.push(c),
            c if c.is_alphanumeric() => out.extend(c.to_lowercase().filter(|l| l.is_alphanumeric())),
            _ => out.push(' '),
        }
        i += 1;
    }
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    normalize(text).split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// Parses a normalized token as a number: digits with an optional decimal
/// part, or an English number word up to twenty.
pub fn parse_number(token: &str) -> Option<f64> {
    if let Some(n) = NUMBER_WORDS.iter().position(|w| *w == token) {
        return Some(n as f64);
    }
    let bytes = token.as_bytes();
    if bytes.is_empty() || !bytes[0].is_ascii_digit() {
        return None;
    }
    let mut dots = 0;
    for b in bytes {
        match b {
            b'0'..=b'9' => {}
            b'.' => dots += 1,
            _ => return None,
        }
    }
    if dots > 1 || token.ends_with('.') {
        return None;
    }
    token.parse().ok()
}

/// Like [`parse_number`] but also accepts `k`/`m` magnitude suffixes.
pub fn parse_money(token: &str) -> Option<f64> {
    if let Some(n) = parse_number(token) {
        return Some(n);
    }
    let (digits, scale) = if let Some(d) = token.strip_suffix('k') {
        (d, 1e3)
    } else if let Some(d) = token.strip_suffix('m') {
        (d, 1e6)
    } else {
        return None;
    };
    if digits.is_empty() || !digits.as_bytes()[0].is_ascii_digit() {
        return None;
    }
    parse_number(digits).map(|n| n * scale)
}

/// `YYYY-MM-DD` with plausible month and day ranges.
pub fn parse_date(token: &str) -> Option<String> {
    let parts: Vec<&str> = token.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
        return None;
    }
    if !parts.iter().all(|p| p.bytes().all(|b| b.is_ascii_digit())) {
        return None;
    }
    let month: u32 = parts[1].parse().ok()?;
    let day: u32 = parts[2].parse().ok()?;
    ((1..=12).contains(&month) && (1..=31).contains(&day)).then(|| token.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_punctuation_and_case() {
        assert_eq!(normalize("Hello!"), "hello");
        assert_eq!(normalize("???"), "");
        assert_eq!(normalize("Approve John Smith's request."), "approve john smith request");
        assert_eq!(normalize("more than $10,000.50"), "more than 10000.50");
        assert_eq!(normalize("since 2020-01-31, ok"), "since 2020-01-31 ok");
        assert_eq!(normalize("Let's go"), "let go");
        assert_eq!(normalize("o'clock"), "oclock");
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_number("10000"), Some(10000.0));
        assert_eq!(parse_number("1.5"), Some(1.5));
        assert_eq!(parse_number("three"), Some(3.0));
        assert_eq!(parse_number("zero"), Some(0.0));
        assert_eq!(parse_number("1.2.3"), None);
        assert_eq!(parse_number("abc"), None);
        assert_eq!(parse_money("500k"), Some(500_000.0));
        assert_eq!(parse_money("1.5m"), Some(1_500_000.0));
        assert_eq!(parse_money("k"), None);
        assert_eq!(parse_date("2020-02-29"), Some("2020-02-29".into()));
        assert_eq!(parse_date("2020-13-01"), None);
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn normalization_idempotent_on_numeric_noise(s in "[0-9a-zA-Z ,.'$-]{0,30}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }
    }
}
