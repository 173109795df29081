//! Symmetric capacity regions: the `R(S) ≤ I[S]` constraint list and the
//! corner points of its dominant face.

use serde::Serialize;
use thiserror::Error;

use crate::users::UserSet;

/// Largest user count for which the region is materialized.
pub const MAX_REGION_USERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("region evaluation supports at most {MAX_REGION_USERS} users, got {0}")]
pub struct TooManyUsers(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub users: UserSet,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRegion {
    pub m: usize,
    pub constraints: Vec<Constraint>,
    /// Distinct dominant-face corner points, sorted lexicographically.
    pub vertices: Vec<Vec<f64>>,
}

impl RateRegion {
    /// Builds the region from `I[S]` given for every non-empty `S`.
    ///
    /// Corner points come from the chain rule along each user permutation π:
    /// `R_{π(k)} = I[{π(1..k)}] − I[{π(1..k−1)}]`.
    pub fn from_fn(m: usize, mut info: impl FnMut(UserSet) -> f64) -> Result<Self, TooManyUsers> {
        if m == 0 || m > MAX_REGION_USERS {
            return Err(TooManyUsers(m));
        }
        let mut table = vec![0.0; 1 << m];
        let constraints = UserSet::nonempty_subsets(m)
            .map(|s| {
                let bound = info(s);
                table[s.mask() as usize] = bound;
                Constraint { users: s, bound }
            })
            .collect();
        let mut vertices: Vec<Vec<f64>> = Vec::new();
        for perm in permutations(m) {
            let mut rate = vec![0.0; m];
            let mut mask = 0usize;
            for &k in &perm {
                let next = mask | 1 << k;
                rate[k] = clean(table[next] - table[mask]);
                mask = next;
            }
            if !vertices.iter().any(|v| v.iter().zip(&rate).all(|(a, b)| (a - b).abs() < 1e-12)) {
                vertices.push(rate);
            }
        }
        vertices.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        Ok(Self { m, constraints, vertices })
    }

    pub fn sum_capacity(&self) -> f64 {
        self.constraints.last().map_or(0.0, |c| c.bound)
    }

    /// Whether `rates` satisfies every constraint within `slack`.
    pub fn contains(&self, rates: &[f64], slack: f64) -> bool {
        rates.len() == self.m
            && rates.iter().all(|&r| r >= -slack)
            && self.constraints.iter().all(|c| c.users.indices().iter().map(|&i| rates[i]).sum::<f64>() <= c.bound + slack)
    }
}

/// Rounds away floating noise so that e.g. `1.0 − 0.6` prints as `0.4`.
fn clean(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], &mut out);
    out
}
