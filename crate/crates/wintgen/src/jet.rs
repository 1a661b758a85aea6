//! Truncated multivariate Taylor jets (forward-mode AD to fixed order).
//!
//! A [`Jet`] stores the raw partial derivatives `∂^α f` at a point for every
//! multi-index `α` with `|α| <= order`, in dense graded-lexicographic order.
//! The coefficients are raw derivatives, *not* the Taylor coefficients
//! `∂^α f / α!`; downstream geometry consumes `∂^α` directly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Default cap on the jet order accepted by the evaluator.
pub const DEFAULT_MAX_ORDER: usize = 6;

/// Shared table data for all jets of a given (arity, order).
#[derive(Debug)]
pub struct JetSpace {
    arity: usize,
    order: usize,
    /// All multi-indices with |α| <= order, graded-lex.
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// Leibniz table: products[k] lists (i, j, binom(γ, β)) with
    /// indices[i] = β, indices[j] = γ - β, indices[k] = γ.
    products: Vec<Vec<(usize, usize, f64)>>,
}

static SPACES: Lazy<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn gen_indices(arity: usize, order: usize) -> Vec<Vec<u8>> {
    let mut all = Vec::new();
    let mut current = vec![0u8; arity];
    fn rec(all: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, pos: usize, remaining: u8) {
        if pos == current.len() {
            all.push(current.clone());
            return;
        }
        for v in 0..=remaining {
            current[pos] = v;
            rec(all, current, pos + 1, remaining - v);
        }
        current[pos] = 0;
    }
    for total in 0..=order as u8 {
        let start = all.len();
        rec(&mut all, &mut current, 0, total);
        // keep only indices whose degree is exactly `total`, lexicographic
        let mut grade: Vec<Vec<u8>> = all.split_off(start);
        grade.retain(|a| a.iter().map(|&x| x as usize).sum::<usize>() == total as usize);
        grade.sort();
        all.extend(grade);
    }
    all
}

fn binom(n: u8, k: u8) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

impl JetSpace {
    /// Get (or build) the shared space for the given arity and order.
    pub fn get(arity: usize, order: usize) -> Arc<JetSpace> {
        let mut cache = SPACES.lock().unwrap();
        cache
            .entry((arity, order))
            .or_insert_with(|| Arc::new(JetSpace::build(arity, order)))
            .clone()
    }

    fn build(arity: usize, order: usize) -> JetSpace {
        let indices = gen_indices(arity, order);
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let mut products = vec![Vec::new(); indices.len()];
        for (k, gamma) in indices.iter().enumerate() {
            // enumerate β <= γ componentwise
            let mut beta = vec![0u8; arity];
            loop {
                let rest: Vec<u8> = gamma.iter().zip(&beta).map(|(&g, &b)| g - b).collect();
                let i = lookup[&beta];
                let j = lookup[&rest];
                let coeff: f64 = gamma
                    .iter()
                    .zip(&beta)
                    .map(|(&g, &b)| binom(g, b))
                    .product();
                products[k].push((i, j, coeff));
                // advance β within the box [0, γ]
                let mut pos = 0;
                loop {
                    if pos == arity {
                        break;
                    }
                    if beta[pos] < gamma[pos] {
                        beta[pos] += 1;
                        break;
                    }
                    beta[pos] = 0;
                    pos += 1;
                }
                if pos == arity {
                    break;
                }
            }
        }
        JetSpace {
            arity,
            order,
            indices,
            lookup,
            products,
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The multi-indices in storage order (graded-lex).
    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

/// A truncated Taylor jet: raw partials `∂^α` for `|α| <= order`.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    /// The jet of the coordinate function `x_i` at `value`.
    pub fn variable(space: &Arc<JetSpace>, value: f64, var: usize) -> Jet {
        assert!(var < space.arity());
        let mut j = Jet::constant(space, value);
        if space.order() >= 1 {
            let mut alpha = vec![0u8; space.arity()];
            alpha[var] = 1;
            let pos = space.position(&alpha).unwrap();
            j.coeffs[pos] = 1.0;
        }
        j
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn arity(&self) -> usize {
        self.space.arity()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Raw partial derivative `∂^α`.
    pub fn partial(&self, alpha: &[u8]) -> Result<f64> {
        let deg: usize = alpha.iter().map(|&x| x as usize).sum();
        if alpha.len() != self.arity() {
            return Err(Error::DimensionMismatch(format!(
                "multi-index arity {} vs jet arity {}",
                alpha.len(),
                self.arity()
            )));
        }
        if deg > self.order() {
            return Err(Error::IndexOutOfOrder {
                index_order: deg,
                jet_order: self.order(),
            });
        }
        Ok(self.coeffs[self.space.position(alpha).unwrap()])
    }

    /// First partial `∂/∂x_i` (convenience; requires order >= 1).
    pub fn d(&self, var: usize) -> f64 {
        let mut alpha = vec![0u8; self.arity()];
        alpha[var] = 1;
        self.partial(&alpha).unwrap()
    }

    /// Second partial `∂²/∂x_i ∂x_j`.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let mut alpha = vec![0u8; self.arity()];
        alpha[i] += 1;
        alpha[j] += 1;
        self.partial(&alpha).unwrap()
    }

    /// Drop partials above `new_order`; raw-partial storage makes this a
    /// coefficient subset.
    pub fn truncate(&self, new_order: usize) -> Jet {
        if new_order >= self.order() {
            return self.clone();
        }
        let space = JetSpace::get(self.arity(), new_order);
        let coeffs = space
            .indices()
            .iter()
            .map(|alpha| self.coeffs[self.space.position(alpha).unwrap()])
            .collect();
        Jet { space, coeffs }
    }

    /// The jet of `∂f/∂x_var`, one order lower.
    pub fn deriv(&self, var: usize) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        let space = JetSpace::get(self.arity(), self.order() - 1);
        let coeffs = space
            .indices()
            .iter()
            .map(|alpha| {
                let mut shifted = alpha.clone();
                shifted[var] += 1;
                self.coeffs[self.space.position(&shifted).unwrap()]
            })
            .collect();
        Jet { space, coeffs }
    }

    fn check_same(&self, other: &Jet) -> Result<()> {
        if self.arity() != other.arity() || self.order() != other.order() {
            return Err(Error::DimensionMismatch(format!(
                "jet ({}, {}) vs jet ({}, {})",
                self.arity(),
                self.order(),
                other.arity(),
                other.order()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Jet) -> Result<Jet> {
        self.check_same(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Jet {
            space: self.space.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &Jet) -> Result<Jet> {
        self.check_same(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Jet {
            space: self.space.clone(),
            coeffs,
        })
    }

    pub fn neg(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += s;
        j
    }

    /// Leibniz product.
    pub fn mul(&self, other: &Jet) -> Result<Jet> {
        self.check_same(other)?;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for (k, terms) in self.space.products.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, j, c) in terms {
                acc += c * self.coeffs[i] * other.coeffs[j];
            }
            coeffs[k] = acc;
        }
        Ok(Jet {
            space: self.space.clone(),
            coeffs,
        })
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.mul(&other.recip()?)
    }

    /// Compose with a univariate analytic function given its Taylor
    /// coefficients `c[k] = φ^(k)(value)/k!` around `self.value()`.
    pub fn compose(&self, taylor: &[f64]) -> Jet {
        // Horner on w = self - value (zero constant term keeps truncation exact)
        let mut w = self.clone();
        w.coeffs[0] = 0.0;
        let k = self.order();
        let mut acc = Jet::constant(&self.space, taylor[k]);
        for i in (0..k).rev() {
            acc = acc.mul(&w).unwrap();
            acc.coeffs[0] += taylor[i];
        }
        acc
    }

    pub fn recip(&self) -> Result<Jet> {
        let x0 = self.value();
        if x0 == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        let mut taylor = vec![0.0; self.order() + 1];
        let mut c = 1.0 / x0;
        for t in taylor.iter_mut() {
            *t = c;
            c *= -1.0 / x0;
        }
        Ok(self.compose(&taylor))
    }

    /// Integer power by repeated squaring (valid for any base value).
    pub fn powi(&self, n: i64) -> Result<Jet> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Jet::constant(&self.space, 1.0);
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul(&base)?;
            }
            base = base.mul(&base)?;
            n >>= 1;
        }
        Ok(result)
    }

    /// Real power `x^r` via the binomial series; requires positive base.
    pub fn powf(&self, r: f64) -> Result<Jet> {
        let x0 = self.value();
        if x0 <= 0.0 {
            return Err(Error::Domain(format!(
                "non-integer power of non-positive base {x0}"
            )));
        }
        let mut taylor = vec![0.0; self.order() + 1];
        let mut c = x0.powf(r);
        for (k, t) in taylor.iter_mut().enumerate() {
            *t = c;
            c *= (r - k as f64) / (k as f64 + 1.0) / x0;
        }
        Ok(self.compose(&taylor))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        if self.value() <= 0.0 {
            return Err(Error::Domain(format!(
                "sqrt of non-positive value {}",
                self.value()
            )));
        }
        self.powf(0.5)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut taylor = vec![0.0; self.order() + 1];
        let mut fact = 1.0;
        for (k, t) in taylor.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *t = e / fact;
        }
        self.compose(&taylor)
    }

    pub fn ln(&self) -> Result<Jet> {
        let x0 = self.value();
        if x0 <= 0.0 {
            return Err(Error::Domain(format!("log of non-positive value {x0}")));
        }
        let mut taylor = vec![0.0; self.order() + 1];
        taylor[0] = x0.ln();
        for (k, t) in taylor.iter_mut().enumerate().skip(1) {
            *t = -(-1.0f64 / x0).powi(k as i32) / k as f64;
        }
        Ok(self.compose(&taylor))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let mut taylor = vec![0.0; self.order() + 1];
        let mut fact = 1.0;
        for (k, t) in taylor.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *t = cycle[k % 4] / fact;
        }
        self.compose(&taylor)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let mut taylor = vec![0.0; self.order() + 1];
        let mut fact = 1.0;
        for (k, t) in taylor.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *t = cycle[k % 4] / fact;
        }
        self.compose(&taylor)
    }

    /// tan via the Riccati recurrence y' = 1 + y².
    pub fn tan(&self) -> Jet {
        let mut a = vec![0.0; self.order() + 2];
        a[0] = self.value().tan();
        for k in 0..=self.order() {
            let conv: f64 = (0..=k).map(|j| a[j] * a[k - j]).sum();
            a[k + 1] = (if k == 0 { 1.0 } else { 0.0 } + conv) / (k as f64 + 1.0);
        }
        a.truncate(self.order() + 1);
        self.compose(&a)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let mut taylor = vec![0.0; self.order() + 1];
        let mut fact = 1.0;
        for (k, t) in taylor.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *t = if k % 2 == 0 { s } else { c } / fact;
        }
        self.compose(&taylor)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let mut taylor = vec![0.0; self.order() + 1];
        let mut fact = 1.0;
        for (k, t) in taylor.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *t = if k % 2 == 0 { c } else { s } / fact;
        }
        self.compose(&taylor)
    }

    /// tanh via y' = 1 - y².
    pub fn tanh(&self) -> Jet {
        let mut a = vec![0.0; self.order() + 2];
        a[0] = self.value().tanh();
        for k in 0..=self.order() {
            let conv: f64 = (0..=k).map(|j| a[j] * a[k - j]).sum();
            a[k + 1] = (if k == 0 { 1.0 } else { 0.0 } - conv) / (k as f64 + 1.0);
        }
        a.truncate(self.order() + 1);
        self.compose(&a)
    }
}
