//! Recursive-descent parser for the formula syntax.
//!
//! Precedence from loosest to tightest: quantifiers (which extend as far
//! right as possible), `<->`, `->` (right associative), `|`, `&`, `!`.
//! `#` starts a comment that runs to the end of the line.

use super::{is_set_var, Formula, Polarity};
use crate::error::{Error, Result};
use crate::nominal::Tag;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Sym(&'static str),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOLS: [&str; 20] =
    ["<->", "->", "!=", "!~", "(", ")", "[", "]", "{", "}", ".", ",", ";", "&", "|", "!", "<", "=", "~", ">"];

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (li, line) in src.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        'outer: while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let (ln, col) = (li + 1, i + 1);
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                    i += 1;
                }
                out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: ln, col });
                continue;
            }
            for s in SYMBOLS {
                let sc: Vec<char> = s.chars().collect();
                if chars[i..].starts_with(&sc) {
                    out.push(Token { tok: Tok::Sym(s), line: ln, col });
                    i += sc.len();
                    continue 'outer;
                }
            }
            return Err(Error::Parse { line: ln, col, msg: format!("unexpected character `{c}`") });
        }
    }
    let (line, col) = out.last().map_or((1, 1), |t| (t.line, t.col + 1));
    out.push(Token { tok: Tok::End, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const RESERVED: [&str; 7] = ["in", "true", "false", "succ", "first", "last", "rigid"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(Error::Parse { line: t.line, col: t.col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn is_quantifier(&self) -> bool {
        matches!(self.peek(), Tok::Ident(k) if k == "E" || k == "A") && matches!(self.peek_at(1), Tok::Ident(_))
    }

    fn var(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(v) if !RESERVED.contains(&v.as_str()) && v != "E" && v != "A" => {
                self.bump();
                Ok(v)
            }
            _ => self.err("expected a variable"),
        }
    }

    fn fo_var(&mut self) -> Result<String> {
        let save = self.pos;
        let v = self.var()?;
        if is_set_var(&v) {
            self.pos = save;
            return self.err(format!("`{v}` is a set variable; position variables are lowercase"));
        }
        Ok(v)
    }

    fn so_var(&mut self) -> Result<String> {
        let save = self.pos;
        let v = self.var()?;
        if !is_set_var(&v) {
            self.pos = save;
            return self.err(format!("`{v}` is a position variable; set variables are uppercase"));
        }
        Ok(v)
    }

    fn formula(&mut self) -> Result<Formula> {
        if self.is_quantifier() {
            let Tok::Ident(q) = self.bump() else { unreachable!() };
            let mut vars = vec![self.var()?];
            while self.eat(",") {
                vars.push(self.var()?);
            }
            self.expect(".")?;
            let mut body = self.formula()?;
            for v in vars.iter().rev() {
                body = if q == "E" { Formula::exists(v, body) } else { Formula::forall(v, body) };
            }
            return Ok(body);
        }
        self.iff()
    }

    /// Right operand of a binary operator: a quantifier may appear unparenthesised.
    fn operand(&mut self, next: fn(&mut Parser) -> Result<Formula>) -> Result<Formula> {
        if self.is_quantifier() {
            self.formula()
        } else {
            next(self)
        }
    }

    fn iff(&mut self) -> Result<Formula> {
        let mut lhs = self.implies()?;
        while self.eat("<->") {
            let rhs = self.operand(Parser::implies)?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if self.eat("->") {
            let rhs = self.operand(Parser::implies)?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.eat("|") {
            let rhs = self.operand(Parser::and)?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.eat("&") {
            let rhs = self.operand(Parser::unary)?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat("!") {
            let inner = self.operand(Parser::unary)?;
            return Ok(Formula::not(inner));
        }
        if self.eat("(") {
            let f = self.formula()?;
            self.expect(")")?;
            return Ok(f);
        }
        self.atom()
    }

    fn polarity(&mut self) -> Result<Polarity> {
        if self.eat("~") {
            Ok(Polarity::Eq)
        } else if self.eat("!~") {
            Ok(Polarity::Neq)
        } else {
            self.err("expected `~` or `!~`")
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        let Tok::Ident(name) = self.peek().clone() else {
            return self.err("expected a formula");
        };
        match name.as_str() {
            "true" => {
                self.bump();
                Ok(Formula::True)
            }
            "false" => {
                self.bump();
                Ok(Formula::False)
            }
            "succ" if self.peek_at(1) == &Tok::Sym("(") => {
                self.bump();
                self.expect("(")?;
                let a = self.fo_var()?;
                self.expect(",")?;
                let b = self.fo_var()?;
                self.expect(")")?;
                Ok(Formula::Succ(a, b))
            }
            "first" | "last" if self.peek_at(1) == &Tok::Sym("(") => {
                self.bump();
                self.expect("(")?;
                let a = self.fo_var()?;
                self.expect(")")?;
                Ok(if name == "first" { Formula::First(a) } else { Formula::Last(a) })
            }
            "rigid" if self.peek_at(1) == &Tok::Sym("[") => self.rigid(),
            "semirigid" if self.peek_at(1) == &Tok::Sym("[") => self.semi_rigid(),
            _ if self.peek_at(1) == &Tok::Sym("(") && !is_set_var(&name) => {
                self.bump();
                self.expect("(")?;
                let a = self.fo_var()?;
                self.expect(")")?;
                Ok(Formula::Tag(Tag::new(name), a))
            }
            _ => {
                let a = self.fo_var()?;
                if self.eat("<") {
                    Ok(Formula::Less(a, self.fo_var()?))
                } else if self.eat(">") {
                    let b = self.fo_var()?;
                    Ok(Formula::Less(b, a))
                } else if self.eat("=") {
                    Ok(Formula::Equal(a, self.fo_var()?))
                } else if self.eat("!=") {
                    Ok(Formula::not(Formula::Equal(a, self.fo_var()?)))
                } else if matches!(self.peek(), Tok::Ident(k) if k == "in") {
                    self.bump();
                    Ok(Formula::In(a, self.so_var()?))
                } else if matches!(self.peek(), Tok::Sym("~") | Tok::Sym("!~")) {
                    let p = self.polarity()?;
                    Ok(Formula::Data(a, self.fo_var()?, p))
                } else {
                    self.err("expected `<`, `=`, `!=`, `in`, `~` or `!~`")
                }
            }
        }
    }

    /// `{u ~ v}`
    fn test_braces(&mut self) -> Result<(String, String, Polarity)> {
        self.expect("{")?;
        let a = self.fo_var()?;
        let p = self.polarity()?;
        let b = self.fo_var()?;
        self.expect("}")?;
        Ok((a, b, p))
    }

    fn rigid(&mut self) -> Result<Formula> {
        self.bump();
        self.expect("[")?;
        let guard = self.formula()?;
        self.expect("]")?;
        let declared = if self.eat("(") {
            let x = self.fo_var()?;
            self.expect(",")?;
            let y = self.fo_var()?;
            self.expect(")")?;
            Some((x, y))
        } else {
            None
        };
        let at = self.pos;
        let (a, b, pol) = self.test_braces()?;
        if a == b {
            self.pos = at;
            return self.err("a data test compares two distinct variables");
        }
        let (x, y) = match declared {
            None => (a, b),
            Some((x, y)) => {
                if !((a == x && b == y) || (a == y && b == x)) {
                    self.pos = at;
                    return self.err(format!("test must compare the guard variables {x} and {y}"));
                }
                (x, y)
            }
        };
        Ok(Formula::rigid(guard, &x, &y, pol))
    }

    fn semi_rigid(&mut self) -> Result<Formula> {
        self.bump();
        self.expect("[")?;
        let alpha = self.formula()?;
        self.expect(";")?;
        let beta = self.formula()?;
        self.expect("]")?;
        self.expect("(")?;
        let x = self.fo_var()?;
        self.expect(",")?;
        let y = self.fo_var()?;
        self.expect(",")?;
        let z = self.fo_var()?;
        self.expect(")")?;
        let at = self.pos;
        let (a, b, pol) = self.test_braces()?;
        if !((a == y && b == z) || (a == z && b == y)) || y == z || x == y || x == z {
            self.pos = at;
            return self.err(format!("test must compare {y} and {z}"));
        }
        Ok(Formula::semi_rigid(alpha, beta, &x, &y, &z, pol))
    }
}

/// Parses a formula; errors carry line and column.
pub fn parse(src: &str) -> Result<Formula> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let f = p.formula()?;
    if p.peek() != &Tok::End {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}
