//! PCTL formulas and their text syntax.
//!
//! ```text
//! state := conj
//! conj  := unary ('&' unary)*
//! unary := '!' unary | atom
//! atom  := 'true' | 'false' | '"' label '"' | '(' state ')'
//!        | 'P' cmp number '[' path ']'
//! path  := 'X' state
//!        | 'F' bound? state
//!        | state 'U' bound? state
//! cmp   := '<=' | '<' | '>=' | '>'
//! bound := '<=' integer
//! ```
//!
//! Whitespace is insignificant, e.g. `P<=0.25 [ true U<=4096 "unsafe" ]`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparator {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparator::Le => value <= bound,
            Comparator::Lt => value < bound,
            Comparator::Ge => value >= bound,
            Comparator::Gt => value > bound,
        }
    }

    pub fn is_upper_bound(self) -> bool {
        matches!(self, Comparator::Le | Comparator::Lt)
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StateFormula {
    True,
    Label(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Prob {
        cmp: Comparator,
        bound: f64,
        path: Box<PathFormula>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathFormula {
    Next(StateFormula),
    BoundedUntil {
        left: StateFormula,
        right: StateFormula,
        hops: usize,
    },
    Until {
        left: StateFormula,
        right: StateFormula,
    },
}

impl StateFormula {
    pub fn label(name: impl Into<String>) -> Self {
        StateFormula::Label(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    pub fn prob(cmp: Comparator, bound: f64, path: PathFormula) -> Result<Self> {
        if !(0.0..=1.0).contains(&bound) {
            return Err(Error::InvalidModel(format!("probability bound {bound} outside [0,1]")));
        }
        Ok(StateFormula::Prob {
            cmp,
            bound,
            path: Box::new(path),
        })
    }

    /// `P<=bound [ true U<=hops "label" ]`
    pub fn safety(label: &str, bound: f64, hops: usize) -> Result<Self> {
        Self::prob(
            Comparator::Le,
            bound,
            PathFormula::BoundedUntil {
                left: StateFormula::True,
                right: StateFormula::label(label),
                hops,
            },
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, pos: 0 };
        let f = p.state()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("trailing input"));
        }
        Ok(f)
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => write!(f, "true"),
            StateFormula::Label(l) => write!(f, "\"{l}\""),
            StateFormula::Not(x) => write!(f, "!({x})"),
            StateFormula::And(a, b) => write!(f, "({a}) & ({b})"),
            StateFormula::Prob { cmp, bound, path } => {
                write!(f, "P{}{} [ {path} ]", cmp.symbol(), bound)
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(x) => write!(f, "X ({x})"),
            PathFormula::BoundedUntil { left, right, hops } => {
                write!(f, "({left}) U<={hops} ({right})")
            }
            PathFormula::Until { left, right } => write!(f, "({left}) U ({right})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    /// Keyword followed by a non-identifier character.
    fn eat_word(&mut self, word: &str) -> bool {
        self.skip_ws();
        let rest = self.rest();
        if rest.starts_with(word)
            && !rest[word.len()..]
                .chars()
                .next()
                .is_some_and(|c| c.is_alphanumeric() || c == '_')
        {
            self.pos += word.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{tok}`")))
        }
    }

    fn state(&mut self) -> Result<StateFormula> {
        let mut f = self.unary()?;
        while self.eat("&") {
            f = StateFormula::and(f, self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<StateFormula> {
        if self.eat("!") {
            return Ok(StateFormula::not(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<StateFormula> {
        if self.eat_word("true") {
            return Ok(StateFormula::True);
        }
        if self.eat_word("false") {
            return Ok(StateFormula::not(StateFormula::True));
        }
        if self.eat("\"") {
            let end = self.rest().find('"').ok_or_else(|| self.error("unterminated label"))?;
            let name = self.rest()[..end].to_string();
            self.pos += end + 1;
            return Ok(StateFormula::Label(name));
        }
        if self.eat("(") {
            let f = self.state()?;
            self.expect(")")?;
            return Ok(f);
        }
        if self.eat("P") {
            let cmp = self.comparator()?;
            let bound = self.number()?;
            self.expect("[")?;
            let path = self.path()?;
            self.expect("]")?;
            return StateFormula::prob(cmp, bound, path).map_err(|_| self.error("bound outside [0,1]"));
        }
        Err(self.error("expected a state formula"))
    }

    fn comparator(&mut self) -> Result<Comparator> {
        for (tok, c) in [
            ("<=", Comparator::Le),
            (">=", Comparator::Ge),
            ("<", Comparator::Lt),
            (">", Comparator::Gt),
        ] {
            if self.eat(tok) {
                return Ok(c);
            }
        }
        Err(self.error("expected a comparator"))
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+')))
            .unwrap_or(self.rest().len());
        let x = self.rest()[..len]
            .parse()
            .map_err(|_| self.error("expected a number"))?;
        self.pos += len;
        Ok(x)
    }

    fn integer(&mut self) -> Result<usize> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(self.rest().len());
        let x = self.rest()[..len]
            .parse()
            .map_err(|_| self.error("expected a hop bound"))?;
        self.pos += len;
        Ok(x)
    }

    fn hop_bound(&mut self) -> Result<Option<usize>> {
        if self.eat("<=") {
            Ok(Some(self.integer()?))
        } else {
            Ok(None)
        }
    }

    fn path(&mut self) -> Result<PathFormula> {
        if self.eat_word("X") {
            return Ok(PathFormula::Next(self.state()?));
        }
        if self.eat_word("F") {
            let hops = self.hop_bound()?;
            let right = self.state()?;
            return Ok(until(StateFormula::True, right, hops));
        }
        let left = self.state()?;
        if !self.eat("U") {
            return Err(self.error("expected `U`"));
        }
        let hops = self.hop_bound()?;
        let right = self.state()?;
        Ok(until(left, right, hops))
    }
}

fn until(left: StateFormula, right: StateFormula, hops: Option<usize>) -> PathFormula {
    match hops {
        Some(hops) => PathFormula::BoundedUntil { left, right, hops },
        None => PathFormula::Until { left, right },
    }
}
