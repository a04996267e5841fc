//! String primitives used by blocking keys, canopy distances, MinHash and the
//! feature library.

use std::collections::BTreeSet;

/// Splits on every run of non-alphanumeric characters, dropping empty tokens.
/// Case is preserved.
pub fn split_tokens(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty())
}

/// Lowercased token set, as used for distances and MinHash.
pub fn token_set(s: &str) -> BTreeSet<String> {
    split_tokens(s).map(str::to_lowercase).collect()
}

/// First run of exactly four consecutive ASCII digits, scanning from the
/// start (or from the end when `from_end` is set).
pub fn year(s: &str, from_end: bool) -> Option<&str> {
    let bytes = s.as_bytes();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i - start >= 4 {
                runs.push(start);
            }
        } else {
            i += 1;
        }
    }
    let start = if from_end { runs.last() } else { runs.first() }?;
    Some(&s[*start..*start + 4])
}

/// Character-level edit distance (insert, delete, substitute; unit costs).
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            let cost = usize::from(ca != cb);
            row[j + 1] = (above + 1).min(row[j] + 1).min(diag + cost);
            diag = above;
        }
    }
    row[b.len()]
}

/// 1 − edit distance / longer length; two empty strings are identical.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let max = a.chars().count().max(b.chars().count());
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / max as f64
}

/// Jaccard similarity of the lowercased token sets. Two token-free strings
/// count as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

fn soundex_digit(c: char) -> Option<u8> {
    match c {
        'B' | 'F' | 'P' | 'V' => Some(b'1'),
        'C' | 'G' | 'J' | 'K' | 'Q' | 'S' | 'X' | 'Z' => Some(b'2'),
        'D' | 'T' => Some(b'3'),
        'L' => Some(b'4'),
        'M' | 'N' => Some(b'5'),
        'R' => Some(b'6'),
        _ => None,
    }
}

/// Classic four-character American Soundex. Non-ASCII-letters are ignored;
/// `None` when the input has no letters at all.
pub fn soundex(s: &str) -> Option<String> {
    let mut letters = s.chars().filter(char::is_ascii_alphabetic).map(|c| c.to_ascii_uppercase());
    let first = letters.next()?;
    let mut code = vec![first as u8];
    let mut prev = soundex_digit(first);
    for c in letters {
        if code.len() == 4 {
            break;
        }
        // H and W do not separate letters with equal codes; vowels do.
        if c == 'H' || c == 'W' {
            continue;
        }
        let digit = soundex_digit(c);
        if let Some(d) = digit {
            if digit != prev {
                code.push(d);
            }
        }
        prev = digit;
    }
    code.resize(4, b'0');
    Some(String::from_utf8(code).expect("ascii"))
}
