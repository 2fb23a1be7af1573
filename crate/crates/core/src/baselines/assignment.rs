//! Two-step optimal assignment of real users to channels.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

use crate::channel::StreamingMode;
use crate::error::{Error, Result};

/// Largest channel count searched by direct enumeration.
pub const ENUMERATION_LIMIT: usize = 10;

/// Objective value of an assignment: satisfied users first, then the mode's secondary term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub satisfied: usize,
    /// Σ|Δ| over satisfied users (living) or ΣΔ over all users (buffered).
    pub secondary: f64,
}

impl Objective {
    pub fn of(
        mode: StreamingMode,
        rates: &[f64],
        requirements: &[f64],
        assignment: &[usize],
    ) -> Self {
        let mut satisfied = 0;
        let mut secondary = 0.0;
        for (n, &c) in assignment.iter().enumerate() {
            let d = rates[c] - requirements[n];
            if d >= 0.0 {
                satisfied += 1;
            }
            match mode {
                StreamingMode::Lsm if d >= 0.0 => secondary += d.abs(),
                StreamingMode::Lsm => {}
                StreamingMode::Bsm => secondary += d,
            }
        }
        Self {
            satisfied,
            secondary,
        }
    }

    /// `Greater` when `self` is the better objective.
    pub fn compare(&self, other: &Self, mode: StreamingMode) -> Ordering {
        self.satisfied
            .cmp(&other.satisfied)
            .then_with(|| match mode {
                StreamingMode::Lsm => other.secondary.total_cmp(&self.secondary),
                StreamingMode::Bsm => self.secondary.total_cmp(&other.secondary),
            })
    }
}

fn check_instance(rates: &[f64], requirements: &[f64]) -> Result<()> {
    if requirements.len() > rates.len() {
        return Err(Error::Infeasible(format!(
            "{} users cannot share {} channels",
            requirements.len(),
            rates.len()
        )));
    }
    if rates.iter().chain(requirements).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "rates and requirements must be finite".into(),
        ));
    }
    Ok(())
}

/// Best injective assignment of users to channels; exact ties go to the
/// lexicographically smallest channel vector.
pub fn exhaustive_assignment(
    rates: &[f64],
    requirements: &[f64],
    mode: StreamingMode,
) -> Result<Vec<usize>> {
    check_instance(rates, requirements)?;
    if rates.len() <= ENUMERATION_LIMIT {
        Ok(enumerate(rates, requirements, mode))
    } else {
        Ok(hungarian_assignment(rates, requirements, mode))
    }
}

struct Search<'a> {
    rates: &'a [f64],
    reqs: &'a [f64],
    mode: StreamingMode,
    current: Vec<usize>,
    used: Vec<bool>,
    best: Option<(Objective, Vec<usize>)>,
}

impl Search<'_> {
    fn visit(&mut self, satisfied_so_far: usize) {
        let n = self.current.len();
        if n == self.reqs.len() {
            let obj = Objective::of(self.mode, self.rates, self.reqs, &self.current);
            let better = match &self.best {
                None => true,
                Some((b, _)) => obj.compare(b, self.mode) == Ordering::Greater,
            };
            if better {
                self.best = Some((obj, self.current.clone()));
            }
            return;
        }
        if let Some((b, _)) = &self.best {
            if satisfied_so_far + (self.reqs.len() - n) < b.satisfied {
                return;
            }
        }
        for c in 0..self.rates.len() {
            if self.used[c] {
                continue;
            }
            let sat = usize::from(self.rates[c] >= self.reqs[n]);
            self.used[c] = true;
            self.current.push(c);
            self.visit(satisfied_so_far + sat);
            self.current.pop();
            self.used[c] = false;
        }
    }
}

fn enumerate(rates: &[f64], requirements: &[f64], mode: StreamingMode) -> Vec<usize> {
    let mut s = Search {
        rates,
        reqs: requirements,
        mode,
        current: Vec::with_capacity(requirements.len()),
        used: vec![false; rates.len()],
        best: None,
    };
    s.visit(0);
    s.best.map(|(_, a)| a).unwrap_or_default()
}

/// Lexicographic cost: satisfaction penalty, then the secondary term.
#[derive(Debug, Clone, Copy, PartialEq)]
struct LexCost(i64, f64);

impl Add for LexCost {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        LexCost(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for LexCost {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        LexCost(self.0 - o.0, self.1 - o.1)
    }
}

impl LexCost {
    const ZERO: Self = LexCost(0, 0.0);
    const INF: Self = LexCost(i64::MAX / 4, 0.0);

    fn lt(&self, o: &Self) -> bool {
        self.0 < o.0 || (self.0 == o.0 && self.1 < o.1)
    }
}

/// Shortest-augmenting-path assignment for `n ≤ m`, minimising lexicographic cost.
pub fn hungarian_assignment(
    rates: &[f64],
    requirements: &[f64],
    mode: StreamingMode,
) -> Vec<usize> {
    let n = requirements.len();
    let m = rates.len();
    let cost = |i: usize, j: usize| {
        let d = rates[j] - requirements[i];
        let sat = d >= 0.0;
        let secondary = match mode {
            StreamingMode::Lsm if sat => d,
            StreamingMode::Lsm => 0.0,
            StreamingMode::Bsm => -d,
        };
        LexCost(-i64::from(sat), secondary)
    };
    // 1-based potentials and matching, column 0 is the virtual root
    let mut u = vec![LexCost::ZERO; n + 1];
    let mut v = vec![LexCost::ZERO; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![LexCost::INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = LexCost::INF;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur.lt(&minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j].lt(&delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
