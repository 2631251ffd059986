use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Space,
    Punct,
    Other,
}

/// A slice of the input; `start`/`end` are byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

fn class(c: char) -> TokenKind {
    if c.is_alphabetic() {
        TokenKind::Word
    } else if c.is_whitespace() {
        TokenKind::Space
    } else if c.is_numeric() {
        TokenKind::Other
    } else {
        TokenKind::Punct
    }
}

/// Split on whitespace and punctuation. Letter, whitespace and digit runs
/// form single tokens; each punctuation character is its own token. The
/// concatenation of all token texts is the input.
pub fn tokenize(text: &str) -> Vec<Span<'_>> {
    let mut out = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        let kind = class(c);
        let mut end = start + c.len_utf8();
        if kind != TokenKind::Punct {
            while let Some(&(i, d)) = iter.peek() {
                if class(d) != kind {
                    break;
                }
                end = i + d.len_utf8();
                iter.next();
            }
        }
        out.push(Span {
            text: &text[start..end],
            start,
            end,
            kind,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sentence() {
        let t = tokenize("The cable is long.");
        let words: Vec<&str> = t.iter().filter(|s| s.kind == TokenKind::Word).map(|s| s.text).collect();
        assert_eq!(words, ["The", "cable", "is", "long"]);
        assert_eq!(t.last().unwrap().text, ".");
        assert_eq!(tokenize("«Kabel»,  über!").iter().map(|s| s.text).collect::<Vec<_>>(), ["«", "Kabel", "»", ",", "  ", "über", "!"]);
    }

    proptest! {
        #[test]
        fn concatenation_reconstructs_input(s in "\\PC{0,60}") {
            let t = tokenize(&s);
            let joined: String = t.iter().map(|x| x.text).collect();
            prop_assert_eq!(&joined, &s);
            for w in t.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
            }
        }
    }
}
