use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{Sentence, Token, PUNCT_TAG};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ConlluOptions {
    /// POS tags (UPOS column) treated as punctuation.
    pub punct_tags: BTreeSet<String>,
}

impl Default for ConlluOptions {
    fn default() -> Self {
        ConlluOptions {
            punct_tags: [PUNCT_TAG.to_string()].into_iter().collect(),
        }
    }
}

pub fn load_conllu(path: &Path, options: &ConlluOptions) -> Result<Vec<Sentence>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_conllu(&text, &path.display().to_string(), options)
}

/// Parses CoNLL-U text into validated sentences.
///
/// Multiword range lines (`3-4`) and empty nodes (`5.1`) are skipped; the
/// syntactic words a range covers are kept. `# sent_id = X` names the next
/// sentence, otherwise sentences are named `s1`, `s2`, ... by position.
pub fn parse_conllu(text: &str, origin: &str, options: &ConlluOptions) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut sent_id: Option<String> = None;
    let mut block_has_content = false;

    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };

    let flush = |tokens: &mut Vec<Token>, sent_id: &mut Option<String>, sentences: &mut Vec<Sentence>| {
        if tokens.is_empty() {
            *sent_id = None;
            return Ok(());
        }
        let id = sent_id
            .take()
            .unwrap_or_else(|| format!("s{}", sentences.len() + 1));
        let sentence = Sentence::new(id, std::mem::take(tokens))?;
        sentences.push(sentence);
        Ok::<(), Error>(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if block_has_content {
                flush(&mut tokens, &mut sent_id, &mut sentences)?;
            }
            block_has_content = false;
            continue;
        }
        block_has_content = true;
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                if key.trim() == "sent_id" {
                    sent_id = Some(value.trim().to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(parse_err(lineno, format!("expected 10 tab-separated columns, found {}", cols.len())));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let index: usize = id
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-integer token id `{id}`")))?;
        let head: usize = cols[6]
            .parse()
            .map_err(|_| parse_err(lineno, format!("non-integer head `{}`", cols[6])))?;
        let upos = cols[3].to_string();
        tokens.push(Token {
            index,
            surface: cols[1].to_string(),
            lemma: cols[2].to_string(),
            is_punct: options.punct_tags.contains(&upos),
            upos,
            xpos: cols[4].to_string(),
            feats: cols[5].to_string(),
            head,
            deprel: cols[7].to_string(),
            deps: cols[8].to_string(),
            misc: cols[9].to_string(),
        });
    }
    flush(&mut tokens, &mut sent_id, &mut sentences)?;
    Ok(sentences)
}

/// Serializes sentences back to CoNLL-U, one `# sent_id` comment per block.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "# sent_id = {}", s.sentence_id);
        for t in &s.tokens {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.index, t.surface, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BLOCKS: &str = "# sent_id = a\n\
1\tDogs\tdog\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n\
2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t_\t_\n\
\n\
1\tCats\tcat\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n\
2\tsleep\tsleep\tVERB\tVBP\t_\t0\troot\t_\t_\n\
3\t.\t.\tPUNCT\t.\t_\t2\tpunct\t_\t_\n";

    #[test]
    fn two_blocks_two_sentences() {
        let s = parse_conllu(TWO_BLOCKS, "t", &ConlluOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].sentence_id, "a");
        assert_eq!(s[1].sentence_id, "s2");
        assert!(s[1].tokens[2].is_punct);
    }

    #[test]
    fn range_line_dropped_words_kept() {
        let text = "1\tand\tand\tCCONJ\tCC\t_\t5\tcc\t_\t_\n\
2\tnow\tnow\tADV\tRB\t_\t5\tadvmod\t_\t_\n\
3-4\tit's\t_\t_\t_\t_\t_\t_\t_\t_\n\
3\tit\tit\tPRON\tPRP\t_\t5\tnsubj\t_\t_\n\
4\t's\tbe\tAUX\tVBZ\t_\t5\taux\t_\t_\n\
5\tfalling\tfall\tVERB\tVBG\t_\t0\troot\t_\t_\n\
5.1\tghost\tghost\tNOUN\tNN\t_\t_\t_\t5:dep\t_\n\
6\t.\t.\tPUNCT\t.\t_\t5\tpunct\t_\t_\n";
        let s = parse_conllu(text, "t", &ConlluOptions::default()).unwrap();
        assert_eq!(s.len(), 1);
        let forms: Vec<_> = s[0].tokens.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(forms, ["and", "now", "it", "'s", "falling", "."]);
        assert_eq!(s[0].word_count(), 5);
    }

    #[test]
    fn non_integer_head_reports_line() {
        let text = "# sent_id = x\n1\ta\ta\tNOUN\t_\t_\troot\troot\t_\t_\n";
        let err = parse_conllu(text, "f.conllu", &ConlluOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("f.conllu:2"), "{msg}");
        assert!(msg.contains("head"), "{msg}");
    }

    #[test]
    fn wrong_arity_rejected() {
        let err = parse_conllu("1\ta\ta\n", "f", &ConlluOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn multi_root_rejected() {
        let text = "1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_\n";
        let err = parse_conllu(text, "f", &ConlluOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Tree { .. }));
    }

    #[test]
    fn custom_punct_tags() {
        let opts = ConlluOptions {
            punct_tags: [".".to_string()].into_iter().collect(),
        };
        let text = "1\tgo\tgo\tVERB\tVB\t_\t0\troot\t_\t_\n2\t.\t.\t.\t.\t_\t1\tpunct\t_\t_\n";
        let s = parse_conllu(text, "f", &opts).unwrap();
        assert!(s[0].tokens[1].is_punct);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let s = parse_conllu(TWO_BLOCKS, "t", &ConlluOptions::default()).unwrap();
        let again = parse_conllu(&write_conllu(&s), "t", &ConlluOptions::default()).unwrap();
        assert_eq!(s, again);
    }
}
