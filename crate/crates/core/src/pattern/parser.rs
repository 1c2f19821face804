use crate::ingest::TimestampFormat;
use crate::store::{Comparator, PropertyValue};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

pub fn parse(text: &str) -> Result<PatternAst, SyntaxError> {
    let tokens = tokenize(text)?;
    Parser { tokens, pos: 0 }.query()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let t = &self.tokens[self.pos];
        let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        expected.sort();
        expected.dedup();
        SyntaxError {
            line: t.line,
            column: t.column,
            expected,
            found: t.tok.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    fn at_ident(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s),
            Tok::QuotedIdent(_) => true,
            _ => false,
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        if self.at_ident() {
            match self.bump() {
                Tok::Ident(s) | Tok::QuotedIdent(s) => Ok(s),
                _ => unreachable!(),
            }
        } else {
            Err(self.error(&[what]))
        }
    }

    fn query(mut self) -> Result<PatternAst, SyntaxError> {
        let mut matches = Vec::new();
        self.keyword("MATCH")?;
        matches.push(self.path()?);
        while self.at_keyword("MATCH") {
            self.bump();
            matches.push(self.path()?);
        }
        let mut filters = Vec::new();
        if self.at_keyword("WHERE") {
            self.bump();
            filters.push(self.comparison()?);
            while self.at_keyword("AND") {
                self.bump();
                filters.push(self.comparison()?);
            }
        }
        if !self.at_keyword("RETURN") {
            let mut expected = vec!["RETURN", "MATCH"];
            if filters.is_empty() {
                expected.push("WHERE");
                expected.extend(["'-['", "'<-['"]);
            } else {
                expected.push("AND");
            }
            return Err(self.error(&expected));
        }
        self.bump();
        let mut returns = vec![self.return_item()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            returns.push(self.return_item()?);
        }
        let mut limit = None;
        if self.at_keyword("LIMIT") {
            self.bump();
            match self.peek().clone() {
                Tok::Int(n) if n > 0 => {
                    self.bump();
                    limit = Some(n);
                }
                _ => return Err(self.error(&["positive integer"])),
            }
        }
        if *self.peek() != Tok::Eof {
            let mut expected = vec!["end of input", "','"];
            if limit.is_none() {
                expected.push("LIMIT");
            }
            return Err(self.error(&expected));
        }
        Ok(PatternAst {
            matches,
            filters,
            returns,
            limit,
        })
    }

    fn path(&mut self) -> Result<PathPattern, SyntaxError> {
        let start = self.node()?;
        let mut steps = Vec::new();
        loop {
            let direction = match (self.peek(), self.peek_at(1)) {
                (Tok::Minus, Tok::LBracket) => RelDirection::Out,
                (Tok::Lt, Tok::Minus) => RelDirection::In,
                _ => break,
            };
            steps.push((self.rel(direction)?, self.node()?));
        }
        Ok(PathPattern { start, steps })
    }

    fn node(&mut self) -> Result<NodePattern, SyntaxError> {
        self.expect(Tok::LParen, "'('")?;
        let var = if self.at_ident() {
            Some(self.ident("variable")?)
        } else {
            None
        };
        let label = if *self.peek() == Tok::Colon {
            self.bump();
            Some(self.ident("label")?)
        } else {
            None
        };
        let props = if *self.peek() == Tok::LBrace {
            self.prop_map()?
        } else {
            Vec::new()
        };
        if *self.peek() != Tok::RParen {
            let mut expected = vec!["')'"];
            if props.is_empty() {
                expected.push("'{'");
                if label.is_none() {
                    expected.push("':'");
                    if var.is_none() {
                        expected.push("variable");
                    }
                }
            }
            return Err(self.error(&expected));
        }
        self.bump();
        Ok(NodePattern { var, label, props })
    }

    fn rel(&mut self, direction: RelDirection) -> Result<RelPattern, SyntaxError> {
        if direction == RelDirection::In {
            self.expect(Tok::Lt, "'<-['")?;
        }
        self.expect(Tok::Minus, "'-['")?;
        self.expect(Tok::LBracket, "'['")?;
        let var = if self.at_ident() {
            Some(self.ident("variable")?)
        } else {
            None
        };
        if *self.peek() != Tok::Colon {
            return Err(self.error(if var.is_none() {
                &["':'", "variable"]
            } else {
                &["':'"]
            }));
        }
        self.bump();
        let rel_type = self.ident("relationship type")?;
        let var_length = if *self.peek() == Tok::Star {
            Some(self.var_length()?)
        } else {
            None
        };
        let props = if *self.peek() == Tok::LBrace {
            self.prop_map()?
        } else {
            Vec::new()
        };
        if *self.peek() != Tok::RBracket {
            let mut expected = vec!["']'"];
            if props.is_empty() {
                expected.push("'{'");
                if var_length.is_none() {
                    expected.push("'*'");
                }
            }
            return Err(self.error(&expected));
        }
        self.bump();
        self.expect(
            Tok::Minus,
            if direction == RelDirection::Out {
                "']->'"
            } else {
                "']-'"
            },
        )?;
        if direction == RelDirection::Out {
            self.expect(Tok::Gt, "']->'")?;
        }
        Ok(RelPattern {
            var,
            rel_type,
            direction,
            var_length,
            props,
        })
    }

    fn bound(&mut self) -> Result<Option<u32>, SyntaxError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                let v = u32::try_from(n).map_err(|_| self.error(&["hop count below 2^32"]))?;
                self.bump();
                Ok(Some(v))
            }
            _ => Ok(None),
        }
    }

    fn var_length(&mut self) -> Result<VarLength, SyntaxError> {
        self.expect(Tok::Star, "'*'")?;
        let at = self.pos;
        let min = self.bound()?;
        let (min, max) = if *self.peek() == Tok::DotDot {
            self.bump();
            (min.unwrap_or(1), self.bound()?)
        } else {
            match min {
                Some(n) => (n, Some(n)),
                None => (1, None),
            }
        };
        if min < 1 || max.is_some_and(|m| m < min) {
            let t = &self.tokens[at];
            return Err(SyntaxError {
                line: t.line,
                column: t.column,
                expected: vec!["bounds with 1 <= min <= max".into()],
                found: format!("*{min}..{}", max.map(|m| m.to_string()).unwrap_or_default()),
            });
        }
        Ok(VarLength { min, max })
    }

    fn prop_map(&mut self) -> Result<Vec<(String, PropertyValue)>, SyntaxError> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut props = Vec::new();
        loop {
            let key = self.ident("property key")?;
            self.expect(Tok::Colon, "':'")?;
            props.push((key, self.literal()?));
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                }
                Tok::RBrace => {
                    self.bump();
                    return Ok(props);
                }
                _ => return Err(self.error(&["','", "'}'"])),
            }
        }
    }

    fn at_literal(&self) -> bool {
        match self.peek() {
            Tok::Str(_) | Tok::Int(_) | Tok::Float(_) | Tok::Minus => true,
            Tok::Ident(s) => {
                ["true", "false"].iter().any(|k| k.eq_ignore_ascii_case(s))
                    || (s.eq_ignore_ascii_case("datetime") && *self.peek_at(1) == Tok::LParen)
            }
            _ => false,
        }
    }

    fn literal(&mut self) -> Result<PropertyValue, SyntaxError> {
        const EXPECTED: [&str; 4] = ["string", "number", "boolean", "datetime('...')"];
        let negative = *self.peek() == Tok::Minus;
        if negative {
            self.bump();
            if !matches!(self.peek(), Tok::Int(_) | Tok::Float(_)) {
                return Err(self.error(&["number"]));
            }
        }
        let value = match self.peek().clone() {
            Tok::Str(s) => PropertyValue::Text(s),
            Tok::Int(n) => {
                let v = if negative {
                    0i64.checked_sub_unsigned(n)
                } else {
                    i64::try_from(n).ok()
                };
                PropertyValue::Int(v.ok_or_else(|| self.error(&["integer in range"]))?)
            }
            Tok::Float(v) => PropertyValue::Float(if negative { -v } else { v }),
            Tok::Ident(s) if s.eq_ignore_ascii_case("true") => PropertyValue::Bool(true),
            Tok::Ident(s) if s.eq_ignore_ascii_case("false") => PropertyValue::Bool(false),
            Tok::Ident(s) if s.eq_ignore_ascii_case("datetime") => {
                self.bump();
                self.expect(Tok::LParen, "'('")?;
                let Tok::Str(text) = self.peek().clone() else {
                    return Err(self.error(&["string"]));
                };
                let ms = TimestampFormat::Iso8601
                    .parse_millis(&text)
                    .ok_or_else(|| self.error(&["ISO-8601 timestamp"]))?;
                self.bump();
                if *self.peek() != Tok::RParen {
                    return Err(self.error(&["')'"]));
                }
                PropertyValue::Timestamp(ms)
            }
            _ => return Err(self.error(&EXPECTED)),
        };
        self.bump();
        Ok(value)
    }

    fn operand(&mut self) -> Result<Operand, SyntaxError> {
        if self.at_literal() {
            return Ok(Operand::Literal(self.literal()?));
        }
        if !self.at_ident() {
            return Err(self.error(&[
                "variable",
                "string",
                "number",
                "boolean",
                "datetime('...')",
            ]));
        }
        let var = self.ident("variable")?;
        if *self.peek() == Tok::Dot {
            self.bump();
            Ok(Operand::Prop(var, self.ident("property key")?))
        } else {
            Ok(Operand::Var(var))
        }
    }

    fn comparison(&mut self) -> Result<Comparison, SyntaxError> {
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Eq => Comparator::Eq,
            Tok::Ne => Comparator::Ne,
            Tok::Lt => Comparator::Lt,
            Tok::Le => Comparator::Le,
            Tok::Gt => Comparator::Gt,
            Tok::Ge => Comparator::Ge,
            _ => return Err(self.error(&["'='", "'<>'", "'<'", "'<='", "'>'", "'>='"])),
        };
        self.bump();
        let right = self.operand()?;
        Ok(Comparison { left, op, right })
    }

    fn return_item(&mut self) -> Result<ReturnItem, SyntaxError> {
        let var = self.ident("variable")?;
        if *self.peek() == Tok::Dot {
            self.bump();
            Ok(ReturnItem::Prop(var, self.ident("property key")?))
        } else {
            Ok(ReturnItem::Var(var))
        }
    }
}
