use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Parameters of an ε-net draw.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetParams {
    pub epsilon: BigRational,
    pub delta: BigRational,
    pub vc: u64,
}

impl NetParams {
    pub fn new(epsilon: BigRational, delta: BigRational, vc: u64) -> Self {
        Self { epsilon, delta, vc }
    }

    /// Parameters for ellipsoid ranges in dimension `n`.
    pub fn for_dim(epsilon: BigRational, delta: BigRational, n: usize) -> Self {
        Self::new(epsilon, delta, ellipsoid_vc(n))
    }
}

/// VC dimension of n-dimensional ellipsoids, `(n² + 3n)/2`.
pub fn ellipsoid_vc(n: usize) -> u64 {
    let n = n as u64;
    (n * n + 3 * n) / 2
}

/// `φ_d(m) = Σ_{i=0}^{d} C(m, i)`, or `2^m` when `d > m`.
pub fn phi(d: u64, m: u64) -> BigInt {
    if d > m {
        return BigInt::one() << m;
    }
    let mut total = BigInt::one();
    let mut binom = BigInt::one();
    for i in 1..=d {
        binom = binom * BigInt::from(m - i + 1) / BigInt::from(i);
        total += &binom;
    }
    total
}

/// Smallest `m >= ceil(8/ε)` with `1 - 2·φ_vc(2m)·2^{-εm/2} > δ`.
///
/// The exponent is rounded down to `floor(εm/2)`, which can only increase
/// `m`. The comparison is exact: with `δ = p/q` the condition reads
/// `2·φ·q < (q - p)·2^e`.
pub fn epsilon_net_size(params: &NetParams) -> u64 {
    static CACHE: OnceLock<Mutex<HashMap<NetParams, u64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&m) = cache.lock().expect("net-size cache").get(params) {
        return m;
    }
    let m = scan_net_size(params);
    cache
        .lock()
        .expect("net-size cache")
        .insert(params.clone(), m);
    m
}

fn scan_net_size(params: &NetParams) -> u64 {
    let eps = &params.epsilon;
    assert!(
        eps.is_positive() && *eps <= BigRational::one(),
        "epsilon must lie in (0, 1]"
    );
    let delta = &params.delta;
    assert!(
        !delta.is_negative() && *delta < BigRational::one(),
        "delta must lie in [0, 1)"
    );
    let (ep, eq) = (eps.numer().clone(), eps.denom().clone());
    let (dp, dq) = (delta.numer().clone(), delta.denom().clone());
    let slack = &dq - &dp;
    let start = {
        let eight = BigInt::from(8) * &eq;
        let (q, r) = eight.div_rem(&ep);
        let q = if r.is_zero() { q } else { q + 1 };
        q.to_u64().expect("8/ε fits in u64")
    };
    let mut m = start.max(1);
    loop {
        let e = (&ep * BigInt::from(m) / (BigInt::from(2) * &eq))
            .to_u64()
            .expect("exponent fits in u64");
        let lhs = BigInt::from(2) * phi(params.vc, 2 * m) * &dq;
        let rhs = &slack << e;
        if lhs < rhs {
            return m;
        }
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn phi_values() {
        assert_eq!(phi(2, 4), BigInt::from(11));
        assert_eq!(phi(3, 2), BigInt::from(4));
        assert_eq!(phi(0, 5), BigInt::from(1));
        assert_eq!(phi(5, 5), BigInt::from(32));
    }

    #[test]
    fn vc_of_ellipsoids() {
        assert_eq!(ellipsoid_vc(2), 5);
        assert_eq!(ellipsoid_vc(3), 9);
    }

    #[test]
    fn floor_suffices() {
        // δ → 0⁺: take δ tiny.
        let p = NetParams::new(q(1, 1), q(1, 1_000_000), 0);
        assert_eq!(epsilon_net_size(&p), 8);
    }

    #[test]
    fn monotone_in_epsilon() {
        let a = epsilon_net_size(&NetParams::new(q(1, 4), q(9, 10), 5));
        let b = epsilon_net_size(&NetParams::new(q(1, 2), q(9, 10), 5));
        assert!(a >= b);
    }
}
