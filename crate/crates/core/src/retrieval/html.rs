fn decode_entity(name: &str) -> Option<char> {
    match name {
        "lt" => Some('<'),
        "gt" => Some('>'),
        "amp" => Some('&'),
        "quot" => Some('"'),
        "apos" | "#39" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            let num = name.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)
        }
    }
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        let tail = &rest[i + 1..];
        match tail.find(';').filter(|&j| j <= 8).and_then(|j| decode_entity(&tail[..j]).map(|c| (c, j))) {
            Some((c, j)) => {
                out.push(c);
                rest = &tail[j + 1..];
            }
            None => {
                out.push('&');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Converts answer or issue HTML to plain text. `<pre>` blocks become fenced
/// code, list items become `- ` lines, headings become `## ` lines.
pub fn html_to_text(html: &str) -> String {
    let mut out = String::new();
    let mut in_pre = false;
    let mut rest = html;
    while let Some(lt) = rest.find('<') {
        let text = &rest[..lt];
        if in_pre {
            out.push_str(&decode_entities(text));
        } else {
            let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
            if !collapsed.is_empty() {
                if text.starts_with(char::is_whitespace) && !out.ends_with(['\n', ' ']) && !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&decode_entities(&collapsed));
                if text.ends_with(char::is_whitespace) {
                    out.push(' ');
                }
            }
        }
        let Some(gt) = rest[lt..].find('>') else {
            rest = &rest[lt..];
            break;
        };
        let tag = rest[lt + 1..lt + gt].trim();
        rest = &rest[lt + gt + 1..];
        let closing = tag.starts_with('/');
        let name: String = tag
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let block_break = |out: &mut String| {
            while out.ends_with(' ') {
                out.pop();
            }
            if !out.is_empty() && !out.ends_with("\n\n") {
                out.push_str(if out.ends_with('\n') { "\n" } else { "\n\n" });
            }
        };
        match (name.as_str(), closing) {
            ("pre", false) => {
                block_break(&mut out);
                out.push_str("```\n");
                in_pre = true;
            }
            ("pre", true) => {
                if !out.ends_with('\n') {
                    out.push('\n');
                }
                out.push_str("```");
                in_pre = false;
                block_break(&mut out);
            }
            ("code", _) if !in_pre => out.push('`'),
            ("br", _) => out.push('\n'),
            ("li", false) => {
                if !out.is_empty() && !out.ends_with('\n') {
                    out.push('\n');
                }
                out.push_str("- ");
            }
            ("h1" | "h2" | "h3" | "h4" | "h5" | "h6", false) => {
                block_break(&mut out);
                out.push_str("## ");
            }
            ("p" | "div" | "ul" | "ol" | "blockquote" | "table" | "tr" | "h1" | "h2" | "h3" | "h4" | "h5" | "h6" | "hr", _) => {
                block_break(&mut out)
            }
            _ => {}
        }
    }
    out.push_str(&decode_entities(rest));
    out.trim().to_string()
}
