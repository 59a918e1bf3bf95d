//! Independent re-verification of rendered trajectories.
//!
//! This interpreter deliberately shares nothing with [`crate::rational`] or
//! [`crate::game`]: it parses the text form, redoes every step with its own
//! `i128` fractions and checks the stated results, the `left:` lists and the
//! final value. Used to grade-check the oracle and the evaluation harness.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Frac(i128, i128);

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Frac {
    fn norm(n: i128, d: i128) -> Option<Frac> {
        if d == 0 {
            return None;
        }
        let g = gcd(n, d).max(1);
        let s = if d < 0 { -1 } else { 1 };
        Some(Frac(s * n / g, s * d / g))
    }

    fn parse(tok: &str) -> Option<Frac> {
        match tok.split_once('/') {
            Some((n, d)) => Frac::norm(n.parse().ok()?, d.parse().ok()?),
            None => Some(Frac(tok.parse().ok()?, 1)),
        }
    }

    fn combine(self, op: &str, o: Frac) -> Option<Frac> {
        let (a, b, c, d) = (self.0, self.1, o.0, o.1);
        match op {
            "+" => Frac::norm(a * d + c * b, b * d),
            "-" => Frac::norm(a * d - c * b, b * d),
            "*" => Frac::norm(a * c, b * d),
            "/" if c != 0 => Frac::norm(a * d, b * c),
            _ => None,
        }
    }
}

fn take(pool: &mut Vec<Frac>, v: Frac) -> bool {
    match pool.iter().position(|&x| x == v) {
        Some(i) => {
            pool.remove(i);
            true
        }
        None => false,
    }
}

/// Evaluates a straight-line program of `(left, op, right)` steps over
/// `numbers` and returns the final value as `(numerator, denominator)`.
pub fn evaluate_program(numbers: &[i64], program: &[(String, char, String)]) -> Result<(i128, i128), String> {
    let mut pool: Vec<Frac> = numbers.iter().map(|&n| Frac(n as i128, 1)).collect();
    for (l, op, r) in program {
        let lv = Frac::parse(l).ok_or_else(|| alloc::format!("bad operand {l}"))?;
        let rv = Frac::parse(r).ok_or_else(|| alloc::format!("bad operand {r}"))?;
        if !take(&mut pool, lv) || !take(&mut pool, rv) {
            return Err(alloc::format!("operands {l} {op} {r} not available"));
        }
        let mut sym = [0u8; 4];
        let v = lv
            .combine(op.encode_utf8(&mut sym), rv)
            .ok_or_else(|| alloc::format!("cannot evaluate {l} {op} {r}"))?;
        pool.push(v);
    }
    match pool.as_slice() {
        [v] => Ok((v.0, v.1)),
        _ => Err(alloc::format!("{} values remain", pool.len())),
    }
}

/// Checks a rendered trajectory line by line and returns whether its final
/// value equals `target`. Any inconsistency in the text is an `Err`.
pub fn verify_rendered(text: &str, target: i64) -> Result<bool, String> {
    let mut lines = text.lines();
    let input = lines
        .next()
        .and_then(|l| l.strip_prefix("Input:"))
        .ok_or("missing Input line")?;
    let mut pool = Vec::new();
    for tok in input.split_whitespace() {
        pool.push(Frac::parse(tok).ok_or("bad input number")?);
    }
    if lines.next() != Some("Steps:") {
        return Err("missing Steps line".to_string());
    }
    let mut steps = 0;
    for line in lines {
        let (expr, left) = line
            .split_once(" (left:")
            .ok_or_else(|| alloc::format!("malformed step {line}"))?;
        let toks: Vec<&str> = expr.split_whitespace().collect();
        let [l, op, r, "=", res] = toks.as_slice() else {
            return Err(alloc::format!("malformed step {line}"));
        };
        let lv = Frac::parse(l).ok_or("bad operand")?;
        let rv = Frac::parse(r).ok_or("bad operand")?;
        let stated = Frac::parse(res).ok_or("bad result")?;
        let v = lv.combine(op, rv).ok_or_else(|| alloc::format!("cannot evaluate {expr}"))?;
        if v != stated {
            return Err(alloc::format!("{expr} is arithmetically wrong"));
        }
        if !take(&mut pool, lv) || !take(&mut pool, rv) {
            return Err(alloc::format!("operands of {expr} not available"));
        }
        pool.push(v);
        let listed: Option<Vec<Frac>> = left
            .trim_end_matches(')')
            .split_whitespace()
            .map(Frac::parse)
            .collect();
        if listed.as_deref() != Some(pool.as_slice()) {
            return Err(alloc::format!("left list of {expr} does not match"));
        }
        steps += 1;
    }
    if steps != 3 || pool.len() != 1 {
        return Err(alloc::format!("expected 3 steps ending in one value, got {steps}"));
    }
    Ok(pool[0] == Frac(target as i128, 1))
}
