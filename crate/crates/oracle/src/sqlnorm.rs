//! Canonical form of emitted SQL for comparisons in tests: whitespace,
//! parentheses, aliases, output column names, conjunct order, equality sides
//! and UNION branch order are not significant.

pub fn tokenize(sql: &str) -> Vec<String> {
    let mut out = Vec::new();
    let chars: Vec<char> = sql.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
            i += 1;
        } else if c == '\'' {
            let start = i;
            i += 1;
            while i < chars.len() {
                if chars[i] == '\'' && chars.get(i + 1) == Some(&'\'') {
                    i += 2;
                } else if chars[i] == '\'' {
                    break;
                } else {
                    i += 1;
                }
            }
            i += 1;
            out.push(chars[start..i].iter().collect());
        } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '*' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || "_.*".contains(chars[i])) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect::<String>().to_lowercase();
            // `100.000` is a thousands separator, not a decimal point
            let grouped = word.split('.').count() > 1
                && word.split('.').enumerate().all(|(k, g)| {
                    g.chars().all(|d| d.is_ascii_digit()) && (k == 0 && !g.is_empty() || g.len() == 3)
                });
            out.push(if grouped { word.replace('.', "") } else { word });
        } else if c == ',' {
            out.push(",".to_string());
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && "<>=!".contains(chars[i]) {
                i += 1;
            }
            i = i.max(start + 1);
            out.push(chars[start..i].iter().collect());
        }
    }
    out
}

const CLAUSE_END: [&str; 4] = ["where", "group", "except", "union"];

/// One SELECT up to the next SELECT keyword, with canonical table names.
fn segment(tokens: &[String]) -> (String, Option<String>) {
    let pos = |from: usize, stops: &[&str]| {
        (from..tokens.len())
            .find(|&i| stops.contains(&tokens[i].as_str()))
            .unwrap_or(tokens.len())
    };
    let from_at = pos(1, &["from"]);
    let from_end = pos(from_at, &CLAUSE_END);
    let mut names = Vec::new();
    let mut seen = std::collections::HashMap::<String, usize>::new();
    for item in tokens[(from_at + 1).min(tokens.len())..from_end].split(|t| t == ",") {
        let table = item[0].clone();
        let alias = if item.len() == 3 { item[2].clone() } else { table.clone() };
        let k = seen.entry(table.clone()).or_default();
        *k += 1;
        let canonical = if *k == 1 { table } else { format!("{table}#{k}") };
        names.push((alias, canonical));
    }
    let rename = |t: &String| match t.split_once('.') {
        Some((q, col)) => match names.iter().find(|(a, _)| a == q) {
            Some((_, c)) => format!("{c}.{col}"),
            None => t.clone(),
        },
        None => t.clone(),
    };
    let items: Vec<String> = tokens[1..from_at]
        .split(|t| t == ",")
        .map(|item| {
            let item = match item.iter().position(|t| t == "as") {
                Some(p) => &item[..p],
                None => item,
            };
            item.iter().map(rename).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let mut froms: Vec<&str> = names.iter().map(|(_, c)| c.as_str()).collect();
    froms.sort_unstable();

    let mut rest = from_end;
    let mut conds = Vec::new();
    if tokens.get(rest).map(String::as_str) == Some("where") {
        let end = pos(rest + 1, &["group", "except", "union"]);
        for c in tokens[rest + 1..end].split(|t| t == "and") {
            let mut c: Vec<String> = c.iter().map(rename).collect();
            if c.len() == 3 && c[1] == "=" && c[0] > c[2] {
                c.swap(0, 2);
            }
            conds.push(c.join(" "));
        }
        conds.sort();
        rest = end;
    }
    let mut group = String::new();
    if tokens.get(rest).map(String::as_str) == Some("group") {
        let end = pos(rest + 2, &["except", "union"]);
        group = tokens[rest + 2..end].iter().map(rename).collect::<Vec<_>>().join(" ");
        rest = end;
    }
    let connector = tokens.get(rest).cloned();
    let text = format!(
        "select {} from {}{}{}",
        items.join(", "),
        froms.join(", "),
        if conds.is_empty() { String::new() } else { format!(" where {}", conds.join(" and ")) },
        if group.is_empty() { String::new() } else { format!(" group by {group}") }
    );
    (text, connector)
}

pub fn normalize(sql: &str) -> String {
    let tokens = tokenize(sql);
    let starts: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i] == "select").collect();
    let head = tokens[..starts[0]].join(" ");
    let mut segments = Vec::new();
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(tokens.len());
        segments.push(segment(&tokens[s..end]));
    }
    // a branch is a run of segments joined by EXCEPT; branches are joined by UNION
    let mut branches: Vec<Vec<String>> = vec![Vec::new()];
    for (text, connector) in segments {
        branches.last_mut().unwrap().push(text);
        if connector.as_deref() == Some("union") {
            branches.push(Vec::new());
        }
    }
    let mut tail = Vec::new();
    if branches.len() > 1 {
        let width = branches[0].len();
        tail = branches.last_mut().unwrap().split_off(width);
    }
    let mut branches: Vec<String> = branches.into_iter().map(|b| b.join(" except ")).collect();
    branches.sort();
    let mut out = format!("{head} {}", branches.join(" union "));
    for t in tail {
        out.push_str(" except ");
        out.push_str(&t);
    }
    out
}

/// Statements of a script, one per line, comments dropped.
pub fn statements(script: &str) -> Vec<String> {
    script
        .lines()
        .filter(|l| !l.starts_with("--") && !l.trim().is_empty())
        .map(|l| l.trim_end_matches(';').to_string())
        .collect()
}
