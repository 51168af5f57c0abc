use super::lexer::{tokenize, Tok, Token};
use crate::ast::*;
use crate::error::Diagnostic;

pub(super) struct ProgramParser {
    toks: Vec<Token>,
    pos: usize,
    /// Counter for desugared anonymous variables, reset per statement.
    anon: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl ProgramParser {
    pub fn new(text: &str) -> PResult<Self> {
        Ok(Self {
            toks: tokenize(text)?,
            pos: 0,
            anon: 0,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn span(&self) -> SourceSpan {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.span)
            .unwrap_or_else(|| SourceSpan::new(1, 1))
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> Diagnostic {
        match self.toks.get(self.pos) {
            Some(t) => Diagnostic::at(t.span, format!("expected {what}, found {:?}", t.tok)),
            None => Diagnostic::at(self.span(), format!("expected {what}, found end of input")),
        }
    }

    pub fn parse(mut self) -> PResult<Program> {
        let mut program = Program::default();
        while self.peek().is_some() {
            self.anon = 0;
            self.statement(&mut program)?;
        }
        Ok(program)
    }

    fn statement(&mut self, program: &mut Program) -> PResult<()> {
        let span = self.span();
        if let Some(Tok::Hash(word)) = self.peek() {
            if word == "maxint" {
                self.pos += 1;
                self.expect(Tok::Eq, "`=` after #maxint")?;
                let n = match self.next() {
                    Some(Token { tok: Tok::Int(n), .. }) if n >= 0 => n as u64,
                    _ => return Err(Diagnostic::at(span, "#maxint needs a nonnegative integer")),
                };
                self.expect(Tok::Dot, "`.`")?;
                program.maxint = n;
                return Ok(());
            }
        }
        if self.peek() == Some(&Tok::If) {
            return Err(Diagnostic::at(
                span,
                "unsupported fragment: integrity constraints (rules without a head)",
            ));
        }
        let head = self.atom()?;
        if matches!(self.peek(), Some(Tok::Pipe)) || matches!(self.peek(), Some(Tok::Ident(v)) if v == "v") {
            return Err(Diagnostic::at(
                span,
                "unsupported fragment: disjunctive heads",
            ));
        }
        if self.eat(&Tok::Query) {
            return Err(Diagnostic::at(
                span,
                "queries are given with the QUERY directive or --query, not in the program",
            ));
        }
        if self.eat(&Tok::Dot) {
            if !head.is_ground() {
                return Err(Diagnostic::at(span, format!("fact `{head}` is not ground")));
            }
            program.facts.push(head);
            return Ok(());
        }
        self.expect(Tok::If, "`:-` or `.`")?;
        let mut body = vec![self.literal()?];
        while self.eat(&Tok::Comma) {
            body.push(self.literal()?);
        }
        self.expect(Tok::Dot, "`,` or `.` ending the rule")?;
        program.rules.push(Rule { head, body, span });
        Ok(())
    }

    fn fresh_anon(&mut self) -> Term {
        let t = Term::Var(format!("_{}", self.anon));
        self.anon += 1;
        t
    }

    fn term(&mut self) -> PResult<Term> {
        let span = self.span();
        match self.next().map(|t| t.tok) {
            Some(Tok::Var(v)) => Ok(Term::Var(v)),
            Some(Tok::Anon) => Ok(self.fresh_anon()),
            Some(Tok::Int(i)) => Ok(Term::Int(i)),
            Some(Tok::Ident(s)) | Some(Tok::Str(s)) => Ok(Term::Str(s)),
            other => Err(Diagnostic::at(span, format!("expected a term, found {other:?}"))),
        }
    }

    fn atom(&mut self) -> PResult<Atom> {
        let span = self.span();
        let predicate = match self.next().map(|t| t.tok) {
            Some(Tok::Ident(name)) => name,
            Some(Tok::Var(v)) => {
                return Err(Diagnostic::at(
                    span,
                    format!("predicate names start with a lowercase letter, found `{v}`"),
                ))
            }
            other => return Err(Diagnostic::at(span, format!("expected an atom, found {other:?}"))),
        };
        if predicate == "not" {
            return Err(Diagnostic::at(span, "`not` is reserved"));
        }
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            args.push(self.term()?);
            while self.eat(&Tok::Comma) {
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        Ok(Atom { predicate, args, span })
    }

    fn cmp_op(tok: Option<&Tok>) -> Option<CmpOp> {
        Some(match tok? {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    fn literal(&mut self) -> PResult<Literal> {
        let span = self.span();
        let negated = matches!(self.peek(), Some(Tok::Ident(w)) if w == "not")
            && !matches!(self.peek_at(1), Some(Tok::LParen | Tok::Comma | Tok::Dot));
        if negated {
            self.pos += 1;
        }
        let mut lit = self.positive_literal()?;
        if negated {
            match &mut lit.kind {
                LiteralKind::Builtin(b) => match b.op {
                    BuiltinOp::Cmp(op) => b.op = BuiltinOp::Cmp(op.negate()),
                    BuiltinOp::Arith(_) => {
                        return Err(Diagnostic::at(span, "negated arithmetic built-ins are not supported"))
                    }
                },
                _ => lit.negated = true,
            }
        }
        Ok(lit)
    }

    fn positive_literal(&mut self) -> PResult<Literal> {
        let span = self.span();
        match self.peek() {
            Some(Tok::Hash(_)) => return Ok(Literal::aggregate(self.aggregate_left()?)),
            Some(Tok::Plus | Tok::Star) if self.peek_at(1) == Some(&Tok::LParen) => {
                let op = if self.next().map(|t| t.tok) == Some(Tok::Plus) {
                    ArithOp::Add
                } else {
                    ArithOp::Mul
                };
                self.expect(Tok::LParen, "`(`")?;
                let a = self.term()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.term()?;
                self.expect(Tok::Comma, "`,`")?;
                let c = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                let mut bi = BuiltinAtom::arith(op, a, b, c);
                bi.span = span;
                return Ok(Literal::builtin(bi));
            }
            Some(Tok::Ident(_)) if Self::cmp_op(self.peek_at(1)).is_none() => {
                return Ok(Literal::pos(self.atom()?));
            }
            _ => {}
        }
        // comparison, infix arithmetic, or aggregate with the guard on the left
        let lhs = self.term()?;
        let op = Self::cmp_op(self.peek()).ok_or_else(|| self.unexpected("a comparison operator"))?;
        self.pos += 1;
        if matches!(self.peek(), Some(Tok::Hash(_))) {
            let mut agg = self.aggregate_body()?;
            agg.cmp = op.flip();
            agg.guard = lhs;
            agg.span = span;
            if agg.cmp == CmpOp::Ne {
                return Err(Diagnostic::at(span, "`!=` is not an aggregate comparison"));
            }
            return Ok(Literal::aggregate(agg));
        }
        let rhs = self.term()?;
        if matches!(self.peek(), Some(Tok::Plus | Tok::Star)) {
            if op != CmpOp::Eq {
                return Err(Diagnostic::at(span, "arithmetic is only allowed as `C = A + B` or `C = A * B`"));
            }
            let arith = if self.next().map(|t| t.tok) == Some(Tok::Plus) {
                ArithOp::Add
            } else {
                ArithOp::Mul
            };
            let rhs2 = self.term()?;
            let mut bi = BuiltinAtom::arith(arith, rhs, rhs2, lhs);
            bi.span = span;
            return Ok(Literal::builtin(bi));
        }
        let mut bi = BuiltinAtom::cmp(op, lhs, rhs);
        bi.span = span;
        Ok(Literal::builtin(bi))
    }

    /// `#f{Vars : Conj}` without the comparison; guard filled by the caller.
    fn aggregate_body(&mut self) -> PResult<AggregateAtom> {
        let span = self.span();
        let func = match self.next().map(|t| t.tok) {
            Some(Tok::Hash(w)) => match w.as_str() {
                "count" => AggregateFunc::Count,
                "sum" => AggregateFunc::Sum,
                "min" => AggregateFunc::Min,
                "max" => AggregateFunc::Max,
                "avg" => AggregateFunc::Avg,
                other => return Err(Diagnostic::at(span, format!("unknown aggregate function `#{other}`"))),
            },
            _ => return Err(Diagnostic::at(span, "expected an aggregate function")),
        };
        self.expect(Tok::LBrace, "`{`")?;
        let mut vars = Vec::new();
        loop {
            match self.next().map(|t| t.tok) {
                Some(Tok::Var(v)) => vars.push(v),
                _ => return Err(Diagnostic::at(span, "the symbolic set needs a list of variables")),
            }
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Colon, "`:` in the symbolic set")?;
        let mut conj = vec![self.atom()?];
        while self.eat(&Tok::Comma) {
            if matches!(self.peek(), Some(Tok::Ident(w)) if w == "not") {
                return Err(self.unexpected("a positive atom (negation inside symbolic sets is unsupported)"));
            }
            conj.push(self.atom()?);
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(AggregateAtom {
            func,
            set: SymbolicSet { vars, conj },
            cmp: CmpOp::Eq,
            guard: Term::Int(0),
            span,
        })
    }

    fn aggregate_left(&mut self) -> PResult<AggregateAtom> {
        let span = self.span();
        let mut agg = self.aggregate_body()?;
        let op = Self::cmp_op(self.peek()).ok_or_else(|| self.unexpected("a comparison after the aggregate"))?;
        if op == CmpOp::Ne {
            return Err(Diagnostic::at(span, "`!=` is not an aggregate comparison"));
        }
        self.pos += 1;
        agg.cmp = op;
        agg.guard = self.term()?;
        Ok(agg)
    }
}
