//! Coherent system topologies and their structure functions.
//!
//! A system is a tree of series, parallel and k-out-of-n gates over
//! component leaves. The text form is
//!
//! ```text
//! expr := series(expr, ...) | parallel(expr, ...) | koutofn(k; expr, ...) | cN
//! ```
//!
//! with components numbered `c1..cs`. Evaluation maps component
//! reliabilities to system reliability; k-out-of-n gates use the
//! Poisson-binomial tail computed by dynamic programming.

use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Largest system the 2^s enumeration oracle accepts.
pub const BRUTEFORCE_MAX_COMPONENTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureNode {
    /// 0-based component index.
    Component(usize),
    Series(Vec<StructureNode>),
    Parallel(Vec<StructureNode>),
    KOutOfN { k: usize, children: Vec<StructureNode> },
}

impl StructureNode {
    pub fn parse(text: &str) -> Result<Self> {
        parse_structure(text)
    }

    /// Number of components `s` (largest id + 1).
    pub fn component_count(&self) -> usize {
        match self {
            StructureNode::Component(i) => i + 1,
            StructureNode::Series(ch) | StructureNode::Parallel(ch) | StructureNode::KOutOfN { children: ch, .. } => {
                ch.iter().map(|c| c.component_count()).max().unwrap_or(0)
            }
        }
    }

    fn visit_leaves(&self, f: &mut impl FnMut(usize)) {
        match self {
            StructureNode::Component(i) => f(*i),
            StructureNode::Series(ch) | StructureNode::Parallel(ch) | StructureNode::KOutOfN { children: ch, .. } => {
                ch.iter().for_each(|c| c.visit_leaves(f))
            }
        }
    }

    /// Occurrence count of each component id.
    pub fn occurrences(&self) -> Vec<usize> {
        let mut counts = vec![0; self.component_count()];
        self.visit_leaves(&mut |i| counts[i] += 1);
        counts
    }

    /// Checks the tree invariants: non-empty gates, `1 <= k <= m`, and every
    /// id in `0..s` referenced at least once.
    pub fn validate(&self) -> Result<()> {
        self.validate_gates()?;
        if let Some(missing) = self.occurrences().iter().position(|&c| c == 0) {
            return Err(Error::InvalidStructure(format!(
                "component c{} is never referenced; every component must appear",
                missing + 1
            )));
        }
        Ok(())
    }

    fn validate_gates(&self) -> Result<()> {
        match self {
            StructureNode::Component(_) => Ok(()),
            StructureNode::Series(ch) | StructureNode::Parallel(ch) => {
                if ch.is_empty() {
                    return Err(Error::InvalidStructure("empty children list".into()));
                }
                ch.iter().try_for_each(|c| c.validate_gates())
            }
            StructureNode::KOutOfN { k, children } => {
                if children.is_empty() {
                    return Err(Error::InvalidStructure("empty children list".into()));
                }
                if *k < 1 || *k > children.len() {
                    return Err(Error::InvalidStructure(format!(
                        "k = {k} out of range 1..={}",
                        children.len()
                    )));
                }
                children.iter().try_for_each(|c| c.validate_gates())
            }
        }
    }

    fn check_inputs(&self, r: &[f64]) -> Result<()> {
        let s = self.component_count();
        if r.len() < s {
            return Err(Error::LengthMismatch { expected: s, got: r.len() });
        }
        if let Some(&bad) = r.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::ProbabilityOutOfRange(bad));
        }
        Ok(())
    }

    /// System reliability `psi(r)`.
    pub fn eval_reliability(&self, r: &[f64]) -> Result<f64> {
        self.check_inputs(r)?;
        Ok(self.eval(r))
    }

    /// Unchecked evaluation for hot loops; `r` must be valid.
    #[inline]
    pub fn eval(&self, r: &[f64]) -> f64 {
        match self {
            StructureNode::Component(i) => r[*i],
            StructureNode::Series(ch) => ch.iter().map(|c| c.eval(r)).product(),
            StructureNode::Parallel(ch) => 1.0 - ch.iter().map(|c| 1.0 - c.eval(r)).product::<f64>(),
            StructureNode::KOutOfN { k, children } => {
                let p: SmallVec<[f64; 32]> = children.iter().map(|c| c.eval(r)).collect();
                poisson_binomial_tail(&p, *k)
            }
        }
    }

    /// Enumeration oracle: sums the probabilities of all working state
    /// vectors in `{0,1}^s`.
    pub fn eval_reliability_bruteforce(&self, r: &[f64]) -> Result<f64> {
        let s = self.component_count();
        if s > BRUTEFORCE_MAX_COMPONENTS {
            return Err(Error::TooManyComponents { got: s, max: BRUTEFORCE_MAX_COMPONENTS });
        }
        self.check_inputs(r)?;
        let mut state = vec![0.0; s];
        let mut total = 0.0;
        for mask in 0u64..(1u64 << s) {
            let mut prob = 1.0;
            for (i, st) in state.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    *st = 1.0;
                    prob *= r[i];
                } else {
                    *st = 0.0;
                    prob *= 1.0 - r[i];
                }
            }
            if self.works(&state) {
                total += prob;
            }
        }
        Ok(total)
    }

    fn works(&self, state: &[f64]) -> bool {
        match self {
            StructureNode::Component(i) => state[*i] == 1.0,
            StructureNode::Series(ch) => ch.iter().all(|c| c.works(state)),
            StructureNode::Parallel(ch) => ch.iter().any(|c| c.works(state)),
            StructureNode::KOutOfN { k, children } => children.iter().filter(|c| c.works(state)).count() >= *k,
        }
    }

    /// Partial derivatives `d psi / d r_i` by pivotal decomposition.
    /// Only defined for trees where each component occurs once.
    pub fn structure_partials(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(r)?;
        if let Some(i) = self.occurrences().iter().position(|&c| c > 1) {
            return Err(Error::RepeatedComponent(i));
        }
        let s = self.component_count();
        let mut work = r[..s].to_vec();
        let mut out = Vec::with_capacity(s);
        for i in 0..s {
            let keep = work[i];
            work[i] = 1.0;
            let up = self.eval(&work);
            work[i] = 0.0;
            let down = self.eval(&work);
            work[i] = keep;
            out.push(up - down);
        }
        Ok(out)
    }
}

/// `P(X >= k)` for a sum of independent Bernoulli(`p_i`) variables, with the
/// count distribution truncated at `k`. O(m k).
pub fn poisson_binomial_tail(p: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > p.len() {
        return 0.0;
    }
    let mut dp: SmallVec<[f64; 32]> = SmallVec::from_elem(0.0, k + 1);
    dp[0] = 1.0;
    for &pi in p {
        let qi = 1.0 - pi;
        dp[k] += dp[k - 1] * pi;
        for c in (1..k).rev() {
            dp[c] = dp[c] * qi + dp[c - 1] * pi;
        }
        dp[0] *= qi;
    }
    dp[k]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Load(usize),
    Series(usize),
    Parallel(usize),
    KOutOfN { k: usize, m: usize },
}

/// A structure flattened into a postfix program for evaluation in tight
/// loops. Pure series and pure parallel systems of leaves skip the stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledStructure {
    shape: Shape,
    components: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Shape {
    Series(Vec<usize>),
    Parallel(Vec<usize>),
    Tape(Vec<Op>),
}

fn leaf_ids(children: &[StructureNode]) -> Option<Vec<usize>> {
    children
        .iter()
        .map(|c| match c {
            StructureNode::Component(i) => Some(*i),
            _ => None,
        })
        .collect()
}

impl CompiledStructure {
    pub fn new(node: &StructureNode) -> Self {
        let shape = match node {
            StructureNode::Component(i) => Shape::Series(vec![*i]),
            StructureNode::Series(ch) if leaf_ids(ch).is_some() => Shape::Series(leaf_ids(ch).unwrap()),
            StructureNode::Parallel(ch) if leaf_ids(ch).is_some() => Shape::Parallel(leaf_ids(ch).unwrap()),
            _ => {
                let mut ops = Vec::new();
                Self::emit(node, &mut ops);
                Shape::Tape(ops)
            }
        };
        CompiledStructure { shape, components: node.component_count() }
    }

    fn emit(node: &StructureNode, ops: &mut Vec<Op>) {
        match node {
            StructureNode::Component(i) => ops.push(Op::Load(*i)),
            StructureNode::Series(ch) => {
                ch.iter().for_each(|c| Self::emit(c, ops));
                ops.push(Op::Series(ch.len()));
            }
            StructureNode::Parallel(ch) => {
                ch.iter().for_each(|c| Self::emit(c, ops));
                ops.push(Op::Parallel(ch.len()));
            }
            StructureNode::KOutOfN { k, children } => {
                children.iter().for_each(|c| Self::emit(c, ops));
                ops.push(Op::KOutOfN { k: *k, m: children.len() });
            }
        }
    }

    pub fn component_count(&self) -> usize {
        self.components
    }

    /// Leaf ids when the system is a plain series of components, so that
    /// `log psi` is the sum of component log-reliabilities.
    pub fn series_leaves(&self) -> Option<&[usize]> {
        match &self.shape {
            Shape::Series(ids) => Some(ids),
            _ => None,
        }
    }

    /// Same value as [`StructureNode::eval`]; `stack` is scratch space.
    #[inline]
    pub fn eval(&self, r: &[f64], stack: &mut Vec<f64>) -> f64 {
        match &self.shape {
            Shape::Series(ids) => ids.iter().map(|&i| r[i]).product(),
            Shape::Parallel(ids) => 1.0 - ids.iter().map(|&i| 1.0 - r[i]).product::<f64>(),
            Shape::Tape(ops) => {
                stack.clear();
                for op in ops {
                    match *op {
                        Op::Load(i) => stack.push(r[i]),
                        Op::Series(m) => {
                            let at = stack.len() - m;
                            let v = stack[at..].iter().product();
                            stack.truncate(at);
                            stack.push(v);
                        }
                        Op::Parallel(m) => {
                            let at = stack.len() - m;
                            let v = 1.0 - stack[at..].iter().map(|x| 1.0 - x).product::<f64>();
                            stack.truncate(at);
                            stack.push(v);
                        }
                        Op::KOutOfN { k, m } => {
                            let at = stack.len() - m;
                            let v = poisson_binomial_tail(&stack[at..], k);
                            stack.truncate(at);
                            stack.push(v);
                        }
                    }
                }
                stack[0]
            }
        }
    }
}

impl fmt::Display for StructureNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, ch: &[StructureNode]| -> fmt::Result {
            for (i, c) in ch.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            Ok(())
        };
        match self {
            StructureNode::Component(i) => write!(f, "c{}", i + 1),
            StructureNode::Series(ch) => {
                write!(f, "series(")?;
                list(f, ch)?;
                write!(f, ")")
            }
            StructureNode::Parallel(ch) => {
                write!(f, "parallel(")?;
                list(f, ch)?;
                write!(f, ")")
            }
            StructureNode::KOutOfN { k, children } => {
                write!(f, "koutofn({k};")?;
                list(f, children)?;
                write!(f, ")")
            }
        }
    }
}

/// Parses and validates a structure expression.
pub fn parse_structure(text: &str) -> Result<StructureNode> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    node.validate()?;
    Ok(node)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected '{}'", c as char)))
        }
    }

    fn ident(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.src[start..self.pos]).to_ascii_lowercase()
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a number"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Syntax { pos: start, msg: "number too large".into() })
    }

    fn expr(&mut self) -> Result<StructureNode> {
        self.skip_ws();
        let start = self.pos;
        let word = self.ident();
        match word.as_str() {
            "c" => {
                let id = self.number()?;
                if id == 0 {
                    return Err(Error::Syntax { pos: start, msg: "component ids start at c1".into() });
                }
                Ok(StructureNode::Component(id - 1))
            }
            "series" => Ok(StructureNode::Series(self.children(false)?.1)),
            "parallel" => Ok(StructureNode::Parallel(self.children(false)?.1)),
            "koutofn" => {
                let (k, children) = self.children(true)?;
                let k = k.unwrap();
                if k < 1 || k > children.len() {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("k = {k} out of range 1..={}", children.len()),
                    });
                }
                Ok(StructureNode::KOutOfN { k, children })
            }
            "" => Err(Error::Syntax { pos: start, msg: "expected an expression".into() }),
            other => Err(Error::Syntax { pos: start, msg: format!("unknown token '{other}'") }),
        }
    }

    fn children(&mut self, with_k: bool) -> Result<(Option<usize>, Vec<StructureNode>)> {
        self.expect(b'(')?;
        let k = if with_k {
            let k = self.number()?;
            self.expect(b';')?;
            Some(k)
        } else {
            None
        };
        if self.peek() == Some(b')') {
            return Err(self.error("empty children list"));
        }
        let mut out = vec![self.expr()?];
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    out.push(self.expr()?);
                }
                Some(b')') => {
                    self.pos += 1;
                    return Ok((k, out));
                }
                _ => return Err(self.error("expected ',' or ')'")),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compiled_matches_tree_evaluation() {
        let r = [0.91, 0.42, 0.77, 0.63, 0.88];
        let mut stack = Vec::new();
        for text in [
            "c1",
            "series(c1,c2,c3)",
            "parallel(c1,c2,c3,c4,c5)",
            "series(c1,parallel(c2,c3),koutofn(2;c3,c4,c5))",
            "koutofn(3;c1,c2,c3,c4,c5)",
        ] {
            let node = parse_structure(text).unwrap();
            let compiled = CompiledStructure::new(&node);
            assert_eq!(compiled.eval(&r, &mut stack), node.eval(&r), "{text}");
        }
        assert!(CompiledStructure::new(&parse_structure("series(c1,c2)").unwrap()).series_leaves().is_some());
        assert!(CompiledStructure::new(&parse_structure("parallel(c1,c2)").unwrap()).series_leaves().is_none());
    }
    use StructureNode::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn parses_series() {
        assert_eq!(
            parse_structure("series(c1,c2,c3)").unwrap(),
            Series(vec![Component(0), Component(1), Component(2)])
        );
    }

    #[test]
    fn parses_series_parallel_whitespace_insensitive() {
        let a = parse_structure("parallel(series(c1,c2),series(c3,c4))").unwrap();
        let b = parse_structure("  parallel ( series( c1 , c2 ) ,\n series(c3,c4) ) ").unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a,
            Parallel(vec![
                Series(vec![Component(0), Component(1)]),
                Series(vec![Component(2), Component(3)])
            ])
        );
    }

    #[test]
    fn parses_nine_out_of_sixteen() {
        let leaves: Vec<String> = (1..=16).map(|i| format!("c{i}")).collect();
        let text = format!("koutofn(9; {})", leaves.join(","));
        match parse_structure(&text).unwrap() {
            KOutOfN { k, children } => {
                assert_eq!(k, 9);
                assert_eq!(children.len(), 16);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn display_round_trips() {
        let t = parse_structure("koutofn(2; c1, parallel(c2,c3), series(c4,c5))").unwrap();
        assert_eq!(parse_structure(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_structure("series(c1,"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_structure("series()"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_structure("foo(c1)"), Err(Error::Syntax { pos: 0, .. })));
        assert!(matches!(parse_structure("koutofn(4; c1,c2,c3)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_structure("koutofn(0; c1,c2)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_structure("series(c1,c2) x"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_structure("c0"), Err(Error::Syntax { .. })));
        // c2 missing
        assert!(matches!(parse_structure("series(c1,c3)"), Err(Error::InvalidStructure(_))));
        match parse_structure("series(c1, #)") {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evaluation_examples() {
        let series = parse_structure("series(c1,c2,c3)").unwrap();
        assert!(close(series.eval_reliability(&[0.9, 0.9, 0.9]).unwrap(), 0.729, 1e-15));
        assert_eq!(series.eval_reliability(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        let par = parse_structure("parallel(c1,c2,c3)").unwrap();
        assert_eq!(par.eval_reliability(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let two_of_three = parse_structure("koutofn(2; c1,c2,c3)").unwrap();
        assert!(close(two_of_three.eval_reliability(&[0.5, 0.5, 0.5]).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn evaluation_errors() {
        let series = parse_structure("series(c1,c2)").unwrap();
        assert!(matches!(series.eval_reliability(&[0.5]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(series.eval_reliability(&[0.5, 1.5]), Err(Error::ProbabilityOutOfRange(_))));
    }

    #[test]
    fn bruteforce_examples() {
        let s = parse_structure("series(c1,c2)").unwrap();
        assert!(close(s.eval_reliability_bruteforce(&[0.5, 0.5]).unwrap(), 0.25, 1e-15));
        let sp = parse_structure("series(parallel(c1,c2),parallel(c3,c4))").unwrap();
        let r = [0.9, 0.8, 0.7, 0.6];
        assert!(close(sp.eval_reliability_bruteforce(&r).unwrap(), 0.8624, 1e-12));
        assert!(close(sp.eval_reliability(&r).unwrap(), 0.8624, 1e-12));
        let leaves: Vec<String> = (1..=21).map(|i| format!("c{i}")).collect();
        let big = parse_structure(&format!("series({})", leaves.join(","))).unwrap();
        assert!(matches!(
            big.eval_reliability_bruteforce(&[0.5; 21]),
            Err(Error::TooManyComponents { .. })
        ));
    }

    #[test]
    fn partial_examples() {
        let s = parse_structure("series(c1,c2,c3)").unwrap();
        let d = s.structure_partials(&[0.9, 0.9, 0.9]).unwrap();
        assert!(close(d[0], 0.81, 1e-15));
        let p = parse_structure("parallel(c1,c2)").unwrap();
        let d = p.structure_partials(&[0.5, 0.5]).unwrap();
        assert!(close(d[0], 0.5, 1e-15) && close(d[1], 0.5, 1e-15));
        let rep = parse_structure("parallel(series(c1,c2),series(c1,c3))").unwrap();
        assert!(matches!(rep.structure_partials(&[0.5; 3]), Err(Error::RepeatedComponent(0))));
    }

    #[test]
    fn koutofn_limits_match_series_and_parallel() {
        let r = [0.3, 0.8, 0.55, 0.91];
        let one = parse_structure("koutofn(1; c1,c2,c3,c4)").unwrap().eval(&r);
        let all = parse_structure("koutofn(4; c1,c2,c3,c4)").unwrap().eval(&r);
        assert!(close(one, parse_structure("parallel(c1,c2,c3,c4)").unwrap().eval(&r), 1e-15));
        assert!(close(all, parse_structure("series(c1,c2,c3,c4)").unwrap().eval(&r), 1e-15));
    }
}
