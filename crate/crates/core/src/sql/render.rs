use std::cell::Cell;

use super::*;

const RESERVED: &[&str] = &[
    "all", "and", "as", "asc", "between", "by", "case", "check", "collate", "column", "constraint", "create",
    "cross", "default", "delete", "desc", "distinct", "drop", "else", "end", "escape", "except", "exists",
    "from", "full", "glob", "group", "having", "in", "index", "inner", "insert", "intersect", "into", "is",
    "isnull", "join", "key", "left", "like", "limit", "match", "natural", "not", "notnull", "null",
    "offset", "on", "or", "order", "outer", "primary", "references", "regexp", "right", "select", "set",
    "table", "then", "to", "transaction", "trigger", "union", "unique", "update", "user", "using",
    "values", "view", "when", "where", "with",
];

fn is_simple(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&name.to_ascii_lowercase().as_str())
}

/// Quotes an identifier only when it is not a plain, non-reserved name.
pub fn quote_ident(name: &str) -> String {
    if is_simple(name) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

fn quote_str(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

struct Renderer<'a> {
    profile: &'a BackendProfile,
    /// Counter for generated subquery aliases.
    next_alias: Cell<usize>,
}

/// Renders a statement for the given profile.
pub fn render(statement: &Statement, profile: &BackendProfile) -> String {
    let r = Renderer {
        profile,
        next_alias: Cell::new(0),
    };
    let paren = profile.nesting == Nesting::Parenthesized;
    match statement {
        Statement::Insert { table, query } => {
            let q = r.query(query);
            if paren {
                format!("INSERT INTO {} ({q})", quote_ident(table))
            } else {
                format!("INSERT INTO {} {q}", quote_ident(table))
            }
        }
        Statement::CreateView { name, query, .. } => {
            let q = r.query(query);
            if paren {
                format!("CREATE VIEW {} AS ({q})", quote_ident(name))
            } else {
                format!("CREATE VIEW {} AS {q}", quote_ident(name))
            }
        }
        Statement::CreateTable { name, columns } => {
            let cols: Vec<String> = columns.iter().map(|(c, t)| format!("{} {t}", quote_ident(c))).collect();
            format!("CREATE TABLE {} ({})", quote_ident(name), cols.join(", "))
        }
        Statement::DeleteAll { table } => format!("DELETE FROM {}", quote_ident(table)),
        Statement::DropTable { name } => format!("DROP TABLE IF EXISTS {}", quote_ident(name)),
        Statement::DropView { name } => format!("DROP VIEW IF EXISTS {}", quote_ident(name)),
        Statement::Select(q) => r.query(q),
    }
}

impl Renderer<'_> {
    fn alias(&self, prefix: &str) -> String {
        let n = self.next_alias.get() + 1;
        self.next_alias.set(n);
        format!("{prefix}_{n}")
    }

    fn query(&self, q: &Query) -> String {
        match q {
            Query::Select(s) => self.select(s),
            Query::Table { name, .. } => format!("SELECT * FROM {}", quote_ident(name)),
            Query::Except(l, r) => {
                if self.profile.dialect == Dialect::NoExcept {
                    if let Query::Table { name, columns } = r.as_ref() {
                        return self.not_exists_difference(l, name, columns);
                    }
                }
                format!("{} EXCEPT {}", self.query(l), self.operand(r, true))
            }
            Query::Union(qs) => qs
                .iter()
                .enumerate()
                .map(|(i, q)| self.operand(q, i > 0))
                .collect::<Vec<_>>()
                .join(" UNION "),
        }
    }

    /// An operand of a compound query. In the parenthesized form the right
    /// side of EXCEPT and every compound branch are wrapped; in the flat form
    /// compound operands after the first become subqueries.
    fn operand(&self, q: &Query, right: bool) -> String {
        let simple = matches!(q, Query::Select(_) | Query::Table { .. });
        match self.profile.nesting {
            Nesting::Parenthesized if right && matches!(q, Query::Table { .. }) => format!("({})", self.query(q)),
            Nesting::Parenthesized if simple => self.query(q),
            Nesting::Parenthesized => format!("({})", self.query(q)),
            Nesting::Flat if simple || !right => self.query(q),
            Nesting::Flat => format!("SELECT * FROM ({}) AS {}", self.query(q), self.alias("sub")),
        }
    }

    fn not_exists_difference(&self, left: &Query, table: &str, columns: &[String]) -> String {
        let alias = self.alias("ex");
        let t = quote_ident(table);
        let conds: Vec<String> = columns
            .iter()
            .map(|c| format!("{t}.{c} = {alias}.{c}", c = quote_ident(c)))
            .collect();
        let mut s = format!(
            "SELECT DISTINCT * FROM ({}) AS {alias} WHERE NOT EXISTS (SELECT 1 FROM {t}",
            self.query(left)
        );
        if !conds.is_empty() {
            s.push_str(" WHERE ");
            s.push_str(&conds.join(" AND "));
        }
        s.push(')');
        s
    }

    fn select(&self, s: &Select) -> String {
        let mut out = String::from("SELECT ");
        if s.distinct {
            out.push_str("DISTINCT ");
        }
        if s.items.is_empty() {
            out.push('*');
        } else {
            let items: Vec<String> = s
                .items
                .iter()
                .map(|it| match &it.alias {
                    Some(a) => format!("{} AS {}", self.expr(&it.expr), quote_ident(a)),
                    None => self.expr(&it.expr),
                })
                .collect();
            out.push_str(&items.join(", "));
        }
        if !s.from.is_empty() {
            let from: Vec<String> = s
                .from
                .iter()
                .map(|f| match &f.alias {
                    Some(a) => format!("{} AS {}", quote_ident(&f.table), quote_ident(a)),
                    None => quote_ident(&f.table),
                })
                .collect();
            out.push_str(" FROM ");
            out.push_str(&from.join(", "));
        }
        if !s.conditions.is_empty() {
            out.push_str(" WHERE ");
            out.push_str(&self.conditions(&s.conditions));
        }
        if !s.group_by.is_empty() {
            let g: Vec<String> = s.group_by.iter().map(|e| self.expr(e)).collect();
            out.push_str(" GROUP BY ");
            out.push_str(&g.join(", "));
        }
        if !s.having.is_empty() {
            out.push_str(" HAVING ");
            out.push_str(&self.conditions(&s.having));
        }
        out
    }

    fn conditions(&self, cs: &[Condition]) -> String {
        cs.iter().map(|c| self.condition(c)).collect::<Vec<_>>().join(" AND ")
    }

    fn condition(&self, c: &Condition) -> String {
        match c {
            Condition::Cmp(l, op, r) => {
                let op = match op {
                    CmpOp::Ne => "<>",
                    other => other.symbol(),
                };
                format!("{} {op} {}", self.expr(l), self.expr(r))
            }
            Condition::NotIn(exprs, sub) => {
                let lhs: Vec<String> = exprs.iter().map(|e| self.expr(e)).collect();
                let lhs = if lhs.len() == 1 {
                    lhs[0].clone()
                } else {
                    format!("({})", lhs.join(", "))
                };
                format!("{lhs} NOT IN ({})", self.select(sub))
            }
            Condition::NotExists(sub) => format!("NOT EXISTS ({})", self.select(sub)),
        }
    }

    fn expr(&self, e: &Expr) -> String {
        match e {
            Expr::Column { qualifier, column } => format!("{}.{}", quote_ident(qualifier), quote_ident(column)),
            Expr::Int(i) => i.to_string(),
            Expr::Str(s) => quote_str(s),
            Expr::Add(a, b) => format!("{} + {}", self.expr(a), self.expr(b)),
            Expr::Mul(a, b) => {
                let side = |x: &Expr| match x {
                    Expr::Add(..) => format!("({})", self.expr(x)),
                    _ => self.expr(x),
                };
                format!("{} * {}", side(a), side(b))
            }
            Expr::Agg(f, arg) => match arg {
                Some(a) => format!("{}({})", f.keyword(), self.expr(a)),
                None => format!("{}(*)", f.keyword()),
            },
            Expr::Coalesce(a, b) => format!("COALESCE({}, {})", self.expr(a), self.expr(b)),
            Expr::Scalar(s) => format!("({})", self.select(s)),
        }
    }
}
