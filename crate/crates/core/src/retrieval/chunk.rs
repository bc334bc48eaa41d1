use super::SearchResultDoc;

pub const MAX_CHUNK_CHARS: usize = 1200;

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn is_section_break(line: &str) -> bool {
    let t = line.trim();
    t.starts_with('#') || (t.len() >= 3 && t.chars().all(|c| c == '-' || c == '=' || c == '*'))
}

/// A paragraph, flagged when it is (or contains) a fenced code block.
struct Block {
    text: String,
    code: bool,
}

/// Sections of paragraphs. Headings start a new section and stay with it;
/// rule lines only separate.
fn sections(body: &str) -> Vec<Vec<Block>> {
    let mut sections: Vec<Vec<Block>> = vec![Vec::new()];
    let mut para: Vec<&str> = Vec::new();
    let mut in_code = false;
    let mut code = false;

    fn flush(para: &mut Vec<&str>, code: &mut bool, into: &mut Vec<Block>) {
        let text = para.join("\n").trim_matches('\n').to_string();
        if !text.trim().is_empty() {
            into.push(Block { text, code: *code });
        }
        para.clear();
        *code = false;
    }

    for line in body.lines() {
        if in_code {
            para.push(line);
            if is_fence(line) {
                in_code = false;
            }
            continue;
        }
        if is_fence(line) {
            in_code = true;
            code = true;
            para.push(line);
        } else if is_section_break(line) {
            flush(&mut para, &mut code, sections.last_mut().unwrap());
            sections.push(Vec::new());
            if line.trim().starts_with('#') {
                para.push(line);
            }
        } else if line.trim().is_empty() {
            flush(&mut para, &mut code, sections.last_mut().unwrap());
        } else {
            para.push(line);
        }
    }
    flush(&mut para, &mut code, sections.last_mut().unwrap());
    sections.retain(|s| !s.is_empty());
    sections
}

/// Splits overlong prose at whitespace so no piece exceeds the limit.
fn split_prose(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for word in text.split_inclusive(char::is_whitespace) {
        if cur.chars().count() + word.trim_end().chars().count() > MAX_CHUNK_CHARS && !cur.is_empty() {
            out.push(cur.trim_end().to_string());
            cur.clear();
        }
        cur.push_str(word);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim_end().to_string());
    }
    out
}

/// Splits a document body into snippets of at most [`MAX_CHUNK_CHARS`]
/// characters, packing paragraphs greedily within each section. Fenced code
/// blocks are never split and may exceed the limit on their own.
pub fn chunk_document(doc: &SearchResultDoc) -> Vec<String> {
    let mut chunks = Vec::new();
    for section in sections(&doc.body) {
        let mut cur = String::new();
        for block in section {
            let pieces = if block.code || block.text.chars().count() <= MAX_CHUNK_CHARS {
                vec![block.text]
            } else {
                split_prose(&block.text)
            };
            for piece in pieces {
                let joined = if cur.is_empty() { piece.chars().count() } else { cur.chars().count() + 2 + piece.chars().count() };
                if !cur.is_empty() && joined > MAX_CHUNK_CHARS {
                    chunks.push(std::mem::take(&mut cur));
                }
                if !cur.is_empty() {
                    cur.push_str("\n\n");
                }
                cur.push_str(&piece);
            }
        }
        if !cur.is_empty() {
            chunks.push(cur);
        }
    }
    chunks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::SourceKind;

    fn doc(body: &str) -> SearchResultDoc {
        SearchResultDoc {
            url: "u".into(),
            title: "t".into(),
            body: body.into(),
            source: SourceKind::WebSearch,
            published_at: None,
            source_signals: Default::default(),
        }
    }

    #[test]
    fn short_body_is_one_chunk() {
        let body = "x".repeat(100);
        assert_eq!(chunk_document(&doc(&body)), [body]);
    }

    #[test]
    fn code_block_kept_whole() {
        let code = format!("```c\n{}\n```", "int a;\n\nint b;\n".repeat(200));
        assert!(code.chars().count() > 2000);
        let body = format!("Intro.\n\n{code}\n\nOutro.");
        let chunks = chunk_document(&doc(&body));
        assert!(chunks.iter().any(|c| c.contains(&code)));
    }

    #[test]
    fn three_long_paragraphs() {
        let p = |c: char| c.to_string().repeat(800);
        let body = format!("{}\n\n{}\n\n{}", p('a'), p('b'), p('c'));
        let chunks = chunk_document(&doc(&body));
        assert_eq!(chunks.len(), 3);
        assert!(chunks.iter().all(|c| c.chars().count() == 800));
    }

    #[test]
    fn small_paragraphs_pack_within_sections() {
        let body = "one\n\ntwo\n\n## Answer\n\nthree\n\n---\n\nfour";
        assert_eq!(chunk_document(&doc(body)), ["one\n\ntwo", "## Answer\n\nthree", "four"]);
    }

    #[test]
    fn long_prose_split_at_words() {
        let body = "word ".repeat(600);
        let chunks = chunk_document(&doc(&body));
        assert!(chunks.len() >= 3);
        assert!(chunks.iter().all(|c| c.chars().count() <= MAX_CHUNK_CHARS));
        assert_eq!(chunks.join(" ").split_whitespace().count(), 600);
    }

    #[test]
    fn empty_body() {
        assert!(chunk_document(&doc("  \n\n ")).is_empty());
    }
}
