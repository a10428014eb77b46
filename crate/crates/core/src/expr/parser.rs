use super::{BinOp, Expression, Func, Var};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Num(f64),
    Ident(&'a str),
    Op(u8),
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok<'a>)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        while let Some(tok) = lx.next_token()? {
            out.push(tok);
        }
        Ok(out)
    }

    fn next_token(&mut self) -> Result<Option<(usize, Tok<'a>)>, ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(start) else {
            return Ok(None);
        };
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => self.number(start)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(&self.src[start..self.pos])
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::new(start, format!("unexpected character `{ch}`")));
            }
        };
        Ok(Some((start, tok)))
    }

    fn number(&mut self, start: usize) -> Result<Tok<'a>, ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let from = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - from
        };
        let mut n = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(ParseError::new(start, "malformed number"));
        }
        if self.pos < bytes.len() && matches!(bytes[self.pos], b'e' | b'E') {
            let mut p = self.pos + 1;
            if p < bytes.len() && matches!(bytes[p], b'+' | b'-') {
                p += 1;
            }
            if digits(&mut p) == 0 {
                return Err(ParseError::new(self.pos, "malformed exponent"));
            }
            self.pos = p;
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ParseError::new(start, "malformed number"))
    }
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    idx: usize,
    end: usize,
}

/// Parses `source` under the fixed grammar documented on the module.
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let mut p = Parser {
        toks: Lexer::tokens(source)?,
        idx: 0,
        end: source.len(),
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some((off, Tok::RParen)) => Err(ParseError::new(off, "unbalanced parenthesis: unmatched `)`")),
        Some((off, _)) => Err(ParseError::new(off, "unexpected token")),
    }
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<(usize, Tok<'a>)> {
        self.toks.get(self.idx).cloned()
    }

    fn bump(&mut self) -> Option<(usize, Tok<'a>)> {
        let t = self.peek();
        self.idx += 1;
        t
    }

    fn eat_op(&mut self, ops: &[u8]) -> Option<u8> {
        match self.peek() {
            Some((_, Tok::Op(c))) if ops.contains(&c) => {
                self.idx += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c) = self.eat_op(b"+-") {
            let rhs = self.term()?;
            let op = if c == b'+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expression::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.eat_op(b"*/") {
            let rhs = self.unary()?;
            let op = if c == b'*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expression::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.eat_op(b"-").is_some() {
            return Ok(Expression::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let base = self.primary()?;
        if self.eat_op(b"^").is_some() {
            let exponent = self.unary()?;
            return Ok(Expression::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        let Some((off, tok)) = self.bump() else {
            return Err(ParseError::new(self.end, "unexpected end of input"));
        };
        match tok {
            Tok::Num(v) => Ok(Expression::Literal(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.close_paren()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if matches!(self.peek(), Some((_, Tok::LParen))) {
                    let func = Func::from_name(name).ok_or_else(|| {
                        ParseError::new(off, format!("unknown function `{name}`"))
                    })?;
                    self.idx += 1;
                    let arg = self.expr()?;
                    self.close_paren()?;
                    Ok(Expression::call(func, arg))
                } else {
                    variable(name)
                        .map(Expression::Variable)
                        .ok_or_else(|| ParseError::new(off, format!("bad variable name `{name}`")))
                }
            }
            Tok::RParen => Err(ParseError::new(off, "unbalanced parenthesis: unmatched `)`")),
            Tok::Op(c) => Err(ParseError::new(
                off,
                format!("unexpected token `{}`", c as char),
            )),
        }
    }

    fn close_paren(&mut self) -> Result<(), ParseError> {
        match self.bump() {
            Some((_, Tok::RParen)) => Ok(()),
            Some((off, _)) => Err(ParseError::new(off, "unbalanced parenthesis: expected `)`")),
            None => Err(ParseError::new(
                self.end,
                "unbalanced parenthesis: expected `)` before end of input",
            )),
        }
    }
}

fn variable(name: &str) -> Option<Var> {
    match name {
        "t" => return Some(Var::Time),
        "tau" => return Some(Var::Tau),
        "sigma" => return Some(Var::Sigma),
        _ => {}
    }
    let (head, digits) = name.split_at(1);
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let k: usize = digits.parse().ok()?;
    match head {
        "x" => Some(Var::State(k - 1)),
        "a" => Some(Var::Init(k - 1)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Expression::*;

    fn var(v: Var) -> Expression {
        Variable(v)
    }

    #[test]
    fn single_production() {
        assert_eq!(
            parse("x1^2").unwrap(),
            Expression::binary(BinOp::Pow, var(Var::State(0)), Literal(2.0))
        );
    }

    #[test]
    fn precedence() {
        let want = Expression::binary(
            BinOp::Add,
            Expression::binary(BinOp::Mul, var(Var::Time), var(Var::State(0))),
            Expression::call(Func::Sin, var(Var::Time)),
        );
        assert_eq!(parse("t*x1 + sin(t)").unwrap(), want);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(
            parse("-x1^2").unwrap(),
            Expression::neg(Expression::binary(BinOp::Pow, var(Var::State(0)), Literal(2.0)))
        );
        assert_eq!(
            parse("2^-1").unwrap(),
            Expression::binary(BinOp::Pow, Literal(2.0), Expression::neg(Literal(1.0)))
        );
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(
            parse("2^3^2").unwrap(),
            Expression::binary(
                BinOp::Pow,
                Literal(2.0),
                Expression::binary(BinOp::Pow, Literal(3.0), Literal(2.0))
            )
        );
    }

    #[test]
    fn subtraction_is_left_associative() {
        assert_eq!(parse("1-2-3").unwrap().to_string(), "((1 - 2) - 3)");
        assert_eq!(parse("8/4/2").unwrap().to_string(), "((8 / 4) / 2)");
    }

    #[test]
    fn error_offsets() {
        let e = parse("x1 +").unwrap_err();
        assert_eq!(e.offset, 4);
        assert_eq!(e.message, "unexpected end of input");

        let e = parse("(x1 + 2").unwrap_err();
        assert_eq!(e.offset, 7);
        assert!(e.message.starts_with("unbalanced parenthesis"));

        let e = parse("x1 + foo(t)").unwrap_err();
        assert_eq!(e.offset, 5);
        assert!(e.message.contains("unknown function"));

        let e = parse("2 * y").unwrap_err();
        assert_eq!(e.offset, 4);
        assert!(e.message.contains("bad variable name"));

        assert_eq!(parse("x1)").unwrap_err().offset, 2);
        assert!(parse("x0").is_err());
        assert!(parse("x01").is_err());
        assert!(parse("1e").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(parse("1.5e-3").unwrap(), Literal(1.5e-3));
        assert_eq!(parse(".25").unwrap(), Literal(0.25));
        assert_eq!(parse("3.").unwrap(), Literal(3.0));
    }
}
