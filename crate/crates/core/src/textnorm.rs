//! Text cleanup applied before training and scoring: lowercasing, cardinal
//! numeral expansion, and codepoint reversal for the reverse-text variants.

use serde::{Deserialize, Serialize};

/// Numerals at or above this magnitude are left as digits.
pub const MAX_EXPANDABLE: u64 = 1_000_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Locale {
    #[default]
    En,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormPolicy {
    pub lowercase: bool,
    pub expand_numbers: bool,
    pub locale: Locale,
}

impl Default for NormPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            expand_numbers: true,
            locale: Locale::En,
        }
    }
}

/// Result of [`normalize_text`]. `warnings` lists numerals that were left
/// untouched because they exceed [`MAX_EXPANDABLE`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub warnings: Vec<String>,
}

pub fn normalize_text(s: &str, policy: &NormPolicy) -> Normalized {
    let mut warnings = Vec::new();
    let expanded = if policy.expand_numbers {
        expand_numerals(s, &mut warnings)
    } else {
        s.to_string()
    };
    let text = if policy.lowercase {
        expanded.to_lowercase()
    } else {
        expanded
    };
    Normalized { text, warnings }
}

/// Codepoint-order reversal: "hello world" becomes "dlrow olleh".
pub fn reverse_text(s: &str) -> String {
    s.chars().rev().collect()
}

fn expand_numerals(s: &str, warnings: &mut Vec<String>) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 16);
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_ascii_digit() {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        // digits, optionally grouped with commas that sit between digits
        let start = i;
        while i < chars.len() {
            let grouping = chars[i] == ',' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit());
            if !(chars[i].is_ascii_digit() || grouping) {
                break;
            }
            i += 1;
        }
        let raw: String = chars[start..i].iter().collect();
        let digits: String = raw.chars().filter(char::is_ascii_digit).collect();
        match digits.parse::<u64>() {
            Ok(value) if value < MAX_EXPANDABLE => {
                if out.chars().last().is_some_and(char::is_alphanumeric) {
                    out.push(' ');
                }
                out.push_str(&cardinal_words(value));
                if chars.get(i).is_some_and(|c| c.is_alphanumeric()) {
                    out.push(' ');
                }
            }
            _ => {
                warnings.push(format!("numeral {raw} left unexpanded (magnitude >= 10^12)"));
                out.push_str(&raw);
            }
        }
    }
    out
}

const ONES: [&str; 20] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen",
];
const TENS: [&str; 10] = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
];
const SCALES: [(u64, &str); 3] = [
    (1_000_000_000, "billion"),
    (1_000_000, "million"),
    (1_000, "thousand"),
];

/// American English cardinal without "and" or hyphens: 237 is
/// "two hundred thirty seven". Panics above [`MAX_EXPANDABLE`].
pub fn cardinal_words(n: u64) -> String {
    assert!(n < MAX_EXPANDABLE, "cardinal_words: {n} out of range");
    if n == 0 {
        return ONES[0].to_string();
    }
    let mut words: Vec<&str> = Vec::new();
    let mut rest = n;
    for (scale, name) in SCALES {
        if rest >= scale {
            below_thousand(rest / scale, &mut words);
            words.push(name);
            rest %= scale;
        }
    }
    below_thousand(rest, &mut words);
    words.join(" ")
}

fn below_thousand(n: u64, words: &mut Vec<&'static str>) {
    debug_assert!(n < 1000);
    let hundreds = n / 100;
    let rest = (n % 100) as usize;
    if hundreds > 0 {
        words.push(ONES[hundreds as usize]);
        words.push("hundred");
    }
    if rest >= 20 {
        words.push(TENS[rest / 10]);
        if !rest.is_multiple_of(10) {
            words.push(ONES[rest % 10]);
        }
    } else if rest > 0 {
        words.push(ONES[rest]);
    }
}
