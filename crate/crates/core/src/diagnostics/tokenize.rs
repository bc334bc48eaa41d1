/// Tokenizes a diagnostic message.
///
/// Splits on whitespace and punctuation, except that quoted spans (`'x'`,
/// `"x"`, `` `x` ``, `‘x’`) are kept whole including their quotes, and dotted,
/// scoped or path-like words (`fmt.Printl`, `std::vector`, `./main.go`) stay
/// single tokens.
pub fn tokenize_message(message: &str) -> Vec<String> {
    let chars: Vec<char> = message.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let after_word = i > 0 && is_core(chars[i - 1]);
        if !after_word {
            if let Some(end) = closing_quote(&chars, i) {
                tokens.push(chars[i..=end].iter().collect());
                i = end + 1;
                continue;
            }
        }
        if let Some(end) = word_end(&chars, i) {
            tokens.push(chars[i..end].iter().collect());
            i = end;
            continue;
        }
        i += 1;
    }
    tokens
}

fn is_core(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn closers(open: char) -> &'static [char] {
    match open {
        '\'' => &['\''],
        '"' => &['"'],
        '`' => &['`', '\''],
        '\u{2018}' => &['\u{2019}'],
        '\u{201c}' => &['\u{201d}'],
        _ => &[],
    }
}

fn closing_quote(chars: &[char], open_at: usize) -> Option<usize> {
    let closers = closers(chars[open_at]);
    if closers.is_empty() {
        return None;
    }
    (open_at + 1..chars.len()).find(|&j| closers.contains(&chars[j]))
}

/// Length of a joiner at `i` that continues a word, if one is there and is
/// followed by a word character.
fn joiner_len(chars: &[char], i: usize) -> Option<usize> {
    let len = match chars.get(i)? {
        '.' | '/' | '-' | '@' | '\\' => 1,
        ':' if chars.get(i + 1) == Some(&':') => 2,
        // `c++` and `x++` keep their suffix.
        '+' if chars.get(i + 1) == Some(&'+') => return Some(2),
        _ => return None,
    };
    chars.get(i + len).copied().filter(|&c| is_core(c)).map(|_| len)
}

fn word_end(chars: &[char], start: usize) -> Option<usize> {
    let mut i = start;
    // Path prefixes such as `./`, `../`, `/` or `~/`.
    while i < chars.len() && matches!(chars[i], '.' | '/' | '~') {
        i += 1;
    }
    if i > start {
        let prefix = &chars[start..i];
        let path_like = prefix.contains(&'/') || prefix.iter().all(|&c| c == '.');
        if !path_like || i >= chars.len() || !is_core(chars[i]) {
            return None;
        }
    } else if !is_core(chars[start]) {
        return None;
    }
    loop {
        while i < chars.len() && is_core(chars[i]) {
            i += 1;
        }
        match joiner_len(chars, i) {
            Some(len) => i += len,
            None => return Some(i),
        }
    }
}
