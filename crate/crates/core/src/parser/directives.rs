use std::collections::BTreeSet;

use crate::ast::{SourceSpan, Term};
use crate::directives::*;
use crate::error::Diagnostic;

type PResult<T> = Result<T, Diagnostic>;

/// Character-level scanner for directive files. Keywords are matched
/// case-insensitively; identifiers are kept verbatim.
pub(super) struct DirectiveParser {
    chars: Vec<char>,
    i: usize,
    line: u32,
    col: u32,
}

const KEYWORDS: &[&str] = &[
    "USEDB", "LIKE", "USE", "CREATE", "AS", "FROM", "MAPTO", "KEEP_AFTER_EXECUTION", "QUERY",
    "DBOUTPUT", "OUTPUT", "APPEND", "OVERWRITE", "IN",
];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

impl DirectiveParser {
    pub fn new(text: &str) -> Self {
        Self {
            chars: text.chars().collect(),
            i: 0,
            line: 1,
            col: 1,
        }
    }

    fn span(&self) -> SourceSpan {
        SourceSpan::new(self.line, self.col)
    }

    fn bump(&mut self) -> Option<char> {
        let c = *self.chars.get(self.i)?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.i += 1;
        Some(c)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn skip_ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('-') if self.chars.get(self.i + 1) == Some(&'-') => {
                    while matches!(self.peek(), Some(c) if c != '\n') {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.peek().is_none()
    }

    /// The next word without consuming it.
    fn peek_word(&mut self) -> Option<String> {
        self.skip_ws();
        let mut j = self.i;
        while j < self.chars.len() && is_word_char(self.chars[j]) {
            j += 1;
        }
        (j > self.i).then(|| self.chars[self.i..j].iter().collect())
    }

    fn peek_keyword(&mut self, kw: &str) -> bool {
        self.peek_word().is_some_and(|w| w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            for _ in 0..kw.chars().count() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(kw))
        }
    }

    fn unexpected(&mut self, what: &str) -> Diagnostic {
        self.skip_ws();
        let span = self.span();
        match self.peek_word() {
            Some(w) => Diagnostic::at(span, format!("expected {what}, found `{w}`")),
            None => match self.peek() {
                Some(c) => Diagnostic::at(span, format!("expected {what}, found `{c}`")),
                None => Diagnostic::at(span, format!("expected {what}, found end of input")),
            },
        }
    }

    fn eat_char(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_char(&mut self, c: char) -> PResult<()> {
        if self.eat_char(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn name(&mut self, what: &str) -> PResult<String> {
        match self.peek_word() {
            Some(w) if !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(&w)) => {
                for _ in 0..w.chars().count() {
                    self.bump();
                }
                Ok(w)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    /// `name:user:password`. The token runs to the next whitespace; a trailing
    /// `.` is taken as the statement terminator.
    fn connection(&mut self) -> PResult<ConnectionSpec> {
        self.skip_ws();
        let span = self.span();
        let start = self.i;
        while matches!(self.peek(), Some(c) if !c.is_whitespace()) {
            self.bump();
        }
        let mut token: String = self.chars[start..self.i].iter().collect();
        if token.ends_with('.') {
            token.pop();
            // leave the terminator for the caller
            self.i -= 1;
            self.col -= 1;
        }
        let mut parts = token.rsplitn(3, ':');
        let (pw, user, db) = (parts.next(), parts.next(), parts.next());
        match (db, user, pw) {
            (Some(db), Some(user), Some(pw)) if !db.is_empty() => Ok(ConnectionSpec::new(db, user, pw)),
            _ => Err(Diagnostic::at(
                span,
                format!("expected DatabaseName:UserName:Password, found `{token}`"),
            )),
        }
    }

    fn name_list(&mut self) -> PResult<Vec<String>> {
        let mut out = vec![self.name("a name")?];
        while self.eat_char(',') {
            out.push(self.name("a name")?);
        }
        self.expect_char(')')?;
        Ok(out)
    }

    fn sql_type(&mut self) -> PResult<SqlType> {
        let span = self.span();
        let w = self.name("an SQL type")?;
        match w.to_ascii_lowercase().as_str() {
            "integer" | "int" => Ok(SqlType::Integer),
            "varchar" => {
                if self.eat_char('(') {
                    self.skip_ws();
                    let start = self.i;
                    while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                        self.bump();
                    }
                    let digits: String = self.chars[start..self.i].iter().collect();
                    let n = digits
                        .parse()
                        .map_err(|_| Diagnostic::at(span, "varchar needs a length"))?;
                    self.expect_char(')')?;
                    Ok(SqlType::Varchar(n))
                } else {
                    Ok(SqlType::DEFAULT_VARCHAR)
                }
            }
            _ => Err(Diagnostic::at(span, format!("unsupported SQL type `{w}`"))),
        }
    }

    /// Raw text between balanced parentheses; the opening one is consumed.
    fn raw_sql(&mut self) -> PResult<String> {
        let span = self.span();
        let start = self.i;
        let mut depth = 1;
        let mut quote: Option<char> = None;
        while let Some(c) = self.bump() {
            match quote {
                Some(q) if c == q => quote = None,
                Some(_) => {}
                None => match c {
                    '\'' | '"' => quote = Some(c),
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            let text: String = self.chars[start..self.i - 1].iter().collect();
                            return Ok(text.trim().to_string());
                        }
                    }
                    _ => {}
                },
            }
        }
        Err(Diagnostic::at(span, "unbalanced parentheses in AS ( SQL )"))
    }

    fn mapto(&mut self) -> PResult<Option<MapTo>> {
        if !self.eat_keyword("MAPTO") {
            return Ok(None);
        }
        let predicate = self.name("a predicate name")?;
        let types = if self.eat_char('(') {
            let mut ts = vec![self.sql_type()?];
            while self.eat_char(',') {
                ts.push(self.sql_type()?);
            }
            self.expect_char(')')?;
            Some(ts)
        } else {
            None
        };
        Ok(Some(MapTo { predicate, types }))
    }

    fn table_def(&mut self) -> PResult<TableDef> {
        self.skip_ws();
        let span = self.span();
        let mode = if self.eat_keyword("USE") {
            TableMode::Use
        } else {
            self.expect_keyword("CREATE")?;
            TableMode::Create
        };
        let table = self.name("a table name")?;
        let attrs = if self.eat_char('(') { Some(self.name_list()?) } else { None };
        let mut def = TableDef {
            mode,
            table,
            attrs,
            as_query: None,
            from_db: None,
            mapto: None,
            keep_after_execution: false,
            span,
        };
        if mode == TableMode::Use {
            if self.eat_keyword("AS") {
                self.expect_char('(')?;
                def.as_query = Some(self.raw_sql()?);
            }
            if self.eat_keyword("FROM") {
                def.from_db = Some(self.connection()?);
            }
            def.mapto = self.mapto()?;
        } else {
            if self.peek_keyword("AS") || self.peek_keyword("FROM") {
                return Err(self.unexpected("MAPTO, KEEP_AFTER_EXECUTION or `.` (CREATE takes no AS/FROM)"));
            }
            def.mapto = self.mapto()?;
            def.keep_after_execution = self.eat_keyword("KEEP_AFTER_EXECUTION");
        }
        if let (Some(attrs), Some(MapTo { types: Some(types), .. })) = (&def.attrs, &def.mapto) {
            if attrs.len() != types.len() {
                return Err(Diagnostic::at(
                    span,
                    format!(
                        "table `{}` lists {} attributes but MAPTO gives {} types",
                        def.table,
                        attrs.len(),
                        types.len()
                    ),
                ));
            }
        }
        self.expect_char('.')?;
        Ok(def)
    }

    fn output(&mut self) -> PResult<OutputDirective> {
        if self.eat_keyword("DBOUTPUT") {
            let db = self.connection()?;
            self.expect_char('.')?;
            return Ok(OutputDirective::DbOutput(db));
        }
        self.expect_keyword("OUTPUT")?;
        let mode = if self.eat_keyword("APPEND") {
            Some(WriteMode::Append)
        } else if self.eat_keyword("OVERWRITE") {
            Some(WriteMode::Overwrite)
        } else {
            None
        };
        let predicate = self.name("a predicate name")?;
        let alias = if self.eat_keyword("AS") {
            Some(self.name("an alias")?)
        } else {
            None
        };
        let target = if self.eat_keyword("IN") {
            Some(self.connection()?)
        } else {
            None
        };
        if target.is_some() {
            self.expect_char('.')?;
        } else {
            self.eat_char('.');
        }
        Ok(OutputDirective::Output {
            mode,
            predicate,
            alias,
            target,
        })
    }

    fn query(&mut self) -> PResult<QueryTarget> {
        let name = self.name("a table or predicate name")?;
        let args = if self.eat_char('(') {
            let mut args = vec![self.query_term()?];
            while self.eat_char(',') {
                args.push(self.query_term()?);
            }
            self.expect_char(')')?;
            Some(args)
        } else {
            None
        };
        self.expect_char('.')?;
        Ok(QueryTarget { name, args })
    }

    fn query_term(&mut self) -> PResult<Term> {
        self.skip_ws();
        let span = self.span();
        if self.eat_char('"') {
            let mut s = String::new();
            loop {
                match self.bump() {
                    Some('"') => return Ok(Term::Str(s)),
                    Some('\\') => s.extend(self.bump()),
                    Some(c) => s.push(c),
                    None => return Err(Diagnostic::at(span, "unterminated string constant")),
                }
            }
        }
        let w = self.peek_word().ok_or_else(|| self.unexpected("a term"))?;
        for _ in 0..w.chars().count() {
            self.bump();
        }
        let first = w.chars().next().unwrap();
        if w == "_" {
            Ok(Term::Var("_0".into()))
        } else if first.is_ascii_digit() {
            w.parse()
                .map(Term::Int)
                .map_err(|_| Diagnostic::at(span, format!("bad integer constant `{w}`")))
        } else if first.is_uppercase() {
            Ok(Term::Var(w))
        } else {
            Ok(Term::Str(w))
        }
    }

    pub fn parse(mut self) -> PResult<DirectiveSet> {
        self.expect_keyword("USEDB")?;
        let working_db = self.connection()?;
        let system_like = if self.eat_keyword("LIKE") {
            let span = self.span();
            let w = self.peek_word().unwrap_or_default();
            let like = SystemLike::from_keyword(&w)
                .ok_or_else(|| Diagnostic::at(span, format!("unknown system `{w}` after LIKE")))?;
            self.name("a system name").ok();
            Some(like)
        } else {
            None
        };
        self.expect_char('.')?;
        let mut set = DirectiveSet {
            working_db,
            system_like,
            tables: Vec::new(),
            query: None,
            outputs: Vec::new(),
        };
        let mut mapped = BTreeSet::new();
        while self.peek_keyword("USE") || self.peek_keyword("CREATE") {
            let def = self.table_def()?;
            if !mapped.insert(def.predicate().to_string()) {
                return Err(Diagnostic::at(
                    def.span,
                    format!("predicate `{}` is mapped to more than one table", def.predicate()),
                ));
            }
            set.tables.push(def);
        }
        if self.eat_keyword("QUERY") {
            set.query = Some(self.query()?);
        }
        while self.peek_keyword("OUTPUT") || self.peek_keyword("DBOUTPUT") {
            set.outputs.push(self.output()?);
        }
        if !self.at_end() {
            let what = if self.peek_keyword("USEDB") {
                "end of input (only one USEDB section is allowed)"
            } else {
                "a table definition, QUERY, OUTPUT or DBOUTPUT in grammar order"
            };
            return Err(self.unexpected(what));
        }
        Ok(set)
    }
}
