//! Linear-chain CRF over per-character tag scores.
//!
//! A path `y` over `m` positions scores
//! `sum_i Z[i, y_i] + A[START, y_1] + sum_i A[y_i, y_{i+1}] + A[y_m, STOP]`.
//! Everything here works in log space in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{log_sum_exp, Tensor};

/// Transition scores over `L` tags plus virtual START and STOP states, so
/// the matrix is `(L + 2) x (L + 2)` with START at row `L` and STOP at
/// `L + 1`. Transitions into START, out of STOP and START -> STOP are
/// structurally `-inf`; the stored values at those cells are ignored and
/// kept at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransitionMatrix(pub Tensor);

impl TransitionMatrix {
    pub fn zeros(num_tags: usize) -> Self {
        TransitionMatrix(Tensor::zeros(&[num_tags + 2, num_tags + 2]))
    }

    pub fn from_tensor(t: Tensor) -> Result<Self> {
        if t.shape.len() != 2 || t.shape[0] != t.shape[1] || t.shape[0] < 3 {
            return Err(Error::Shape(format!("transition matrix shape {:?}", t.shape)));
        }
        let mut m = TransitionMatrix(t);
        m.pin_forbidden();
        Ok(m)
    }

    pub fn num_tags(&self) -> usize {
        self.0.rows() - 2
    }

    pub fn start(&self) -> usize {
        self.num_tags()
    }

    pub fn stop(&self) -> usize {
        self.num_tags() + 1
    }

    pub fn is_forbidden(&self, from: usize, to: usize) -> bool {
        to == self.start() || from == self.stop() || (from == self.start() && to == self.stop())
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        if self.is_forbidden(from, to) {
            f64::NEG_INFINITY
        } else {
            self.0.get(from, to)
        }
    }

    pub fn set(&mut self, from: usize, to: usize, v: f64) {
        if !self.is_forbidden(from, to) {
            self.0.set(from, to, v);
        }
    }

    /// Resets the stored values of forbidden cells to zero.
    pub fn pin_forbidden(&mut self) {
        let n = self.0.rows();
        for from in 0..n {
            for to in 0..n {
                if self.is_forbidden(from, to) {
                    self.0.set(from, to, 0.0);
                }
            }
        }
    }
}

fn check(z: &Tensor, a: &TransitionMatrix) -> Result<(usize, usize)> {
    let l = a.num_tags();
    if z.shape.len() != 2 || z.cols() != l {
        return Err(Error::Shape(format!(
            "emissions {:?} for {} tags",
            z.shape, l
        )));
    }
    if z.rows() == 0 {
        return Err(Error::Shape("empty emission matrix".into()));
    }
    Ok((z.rows(), l))
}

/// Emission sum plus transition sum including START and STOP.
pub fn path_score(z: &Tensor, y: &[usize], a: &TransitionMatrix) -> Result<f64> {
    let (m, l) = check(z, a)?;
    if y.len() != m {
        return Err(Error::Shape(format!("path of length {} for {} positions", y.len(), m)));
    }
    if let Some(&bad) = y.iter().find(|&&t| t >= l) {
        return Err(Error::Shape(format!("tag index {bad} >= {l}")));
    }
    let mut s = a.get(a.start(), y[0]) + a.get(y[m - 1], a.stop());
    for i in 0..m {
        s += z.get(i, y[i]);
        if i + 1 < m {
            s += a.get(y[i], y[i + 1]);
        }
    }
    Ok(s)
}

/// [`path_score`] restricted to the positions where `mask` is true.
pub fn path_score_masked(
    z: &Tensor,
    y: &[usize],
    mask: &[bool],
    a: &TransitionMatrix,
) -> Result<f64> {
    if mask.len() != z.rows() || y.len() != z.rows() {
        return Err(Error::Shape("mask, path and emissions differ in length".into()));
    }
    let keep: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let mut zr = Tensor::zeros(&[keep.len(), z.cols()]);
    for (r, &i) in keep.iter().enumerate() {
        zr.row_mut(r).copy_from_slice(z.row(i));
    }
    let yr: Vec<usize> = keep.iter().map(|&i| y[i]).collect();
    path_score(&zr, &yr, a)
}

/// Forward log-scores: `alpha[i][s]` is the log-sum over all prefixes
/// ending in tag `s` at position `i`, including that position's emission.
fn forward_scores(z: &Tensor, a: &TransitionMatrix) -> Vec<Vec<f64>> {
    let (m, l) = (z.rows(), z.cols());
    let mut alpha = vec![vec![0.0; l]; m];
    for s in 0..l {
        alpha[0][s] = a.get(a.start(), s) + z.get(0, s);
    }
    for i in 1..m {
        for s in 0..l {
            let prev = &alpha[i - 1];
            alpha[i][s] = log_sum_exp((0..l).map(|p| prev[p] + a.get(p, s))) + z.get(i, s);
        }
    }
    alpha
}

/// Backward log-scores: `beta[i][s]` is the log-sum over all suffixes
/// after tag `s` at position `i`, including STOP, excluding the emission
/// at `i`.
fn backward_scores(z: &Tensor, a: &TransitionMatrix) -> Vec<Vec<f64>> {
    let (m, l) = (z.rows(), z.cols());
    let mut beta = vec![vec![0.0; l]; m];
    for s in 0..l {
        beta[m - 1][s] = a.get(s, a.stop());
    }
    for i in (0..m - 1).rev() {
        for s in 0..l {
            let next = &beta[i + 1];
            beta[i][s] =
                log_sum_exp((0..l).map(|n| a.get(s, n) + z.get(i + 1, n) + next[n]));
        }
    }
    beta
}

/// Log of the sum of `exp(path_score)` over all `L^m` paths.
pub fn log_partition(z: &Tensor, a: &TransitionMatrix) -> Result<f64> {
    let (m, l) = check(z, a)?;
    let alpha = forward_scores(z, a);
    Ok(log_sum_exp((0..l).map(|s| alpha[m - 1][s] + a.get(s, a.stop()))))
}

/// Negative log-likelihood of `gold`.
pub fn nll_loss(z: &Tensor, gold: &[usize], a: &TransitionMatrix) -> Result<f64> {
    Ok(log_partition(z, a)? - path_score(z, gold, a)?)
}

/// Loss with its gradients with respect to `z` and the transitions.
pub struct CrfGradient {
    pub loss: f64,
    pub d_emissions: Tensor,
    pub d_transitions: Tensor,
}

/// NLL and exact gradients via forward-backward marginals.
pub fn nll_with_grad(z: &Tensor, gold: &[usize], a: &TransitionMatrix) -> Result<CrfGradient> {
    let (m, l) = check(z, a)?;
    let gold_score = path_score(z, gold, a)?;
    let alpha = forward_scores(z, a);
    let beta = backward_scores(z, a);
    let log_z = log_sum_exp((0..l).map(|s| alpha[m - 1][s] + a.get(s, a.stop())));

    let mut dz = Tensor::zeros(&[m, l]);
    let mut da = Tensor::zeros(&a.0.shape);
    for i in 0..m {
        for s in 0..l {
            let p = (alpha[i][s] + beta[i][s] - log_z).exp();
            dz.set(i, s, p);
        }
    }
    for s in 0..l {
        let p0 = dz.get(0, s);
        da.set(a.start(), s, p0);
        let pm = dz.get(m - 1, s);
        da.set(s, a.stop(), pm);
    }
    for i in 0..m.saturating_sub(1) {
        for p in 0..l {
            for n in 0..l {
                let lp = alpha[i][p] + a.get(p, n) + z.get(i + 1, n) + beta[i + 1][n] - log_z;
                let v = da.get(p, n) + lp.exp();
                da.set(p, n, v);
            }
        }
    }
    // Subtract the gold path's indicator counts.
    for i in 0..m {
        let v = dz.get(i, gold[i]) - 1.0;
        dz.set(i, gold[i], v);
    }
    let v = da.get(a.start(), gold[0]) - 1.0;
    da.set(a.start(), gold[0], v);
    let v = da.get(gold[m - 1], a.stop()) - 1.0;
    da.set(gold[m - 1], a.stop(), v);
    for i in 0..m - 1 {
        let v = da.get(gold[i], gold[i + 1]) - 1.0;
        da.set(gold[i], gold[i + 1], v);
    }
    Ok(CrfGradient {
        loss: log_z - gold_score,
        d_emissions: dz,
        d_transitions: da,
    })
}

/// Highest-scoring path and its score. At every step ties go to the
/// lowest tag index.
pub fn viterbi(z: &Tensor, a: &TransitionMatrix) -> Result<(Vec<usize>, f64)> {
    let (m, l) = check(z, a)?;
    let mut delta: Vec<f64> = (0..l).map(|s| a.get(a.start(), s) + z.get(0, s)).collect();
    let mut back = vec![vec![0usize; l]; m];
    for i in 1..m {
        let mut next = vec![0.0; l];
        for s in 0..l {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (p, &d) in delta.iter().enumerate() {
                let v = d + a.get(p, s);
                if v > best_v {
                    best_v = v;
                    best = p;
                }
            }
            back[i][s] = best;
            next[s] = best_v + z.get(i, s);
        }
        delta = next;
    }
    let mut last = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (s, &d) in delta.iter().enumerate() {
        let v = d + a.get(s, a.stop());
        if v > best_v {
            best_v = v;
            last = s;
        }
    }
    let mut path = vec![0usize; m];
    path[m - 1] = last;
    for i in (1..m).rev() {
        path[i - 1] = back[i][path[i]];
    }
    Ok((path, best_v))
}

/// Independent per-position argmax (lowest index on ties); the decoder
/// used when the CRF layer is ablated.
pub fn softmax_decode(z: &Tensor) -> Vec<usize> {
    (0..z.rows())
        .map(|i| {
            let row = z.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Per-position cross-entropy of the row softmax against `gold`, summed
/// over positions, with its gradient.
pub fn softmax_nll_with_grad(z: &Tensor, gold: &[usize]) -> Result<(f64, Tensor)> {
    if gold.len() != z.rows() {
        return Err(Error::Shape(format!(
            "{} gold tags for {} positions",
            gold.len(),
            z.rows()
        )));
    }
    let mut loss = 0.0;
    let mut dz = Tensor::zeros(&z.shape);
    for (i, &g) in gold.iter().enumerate() {
        let row = z.row(i);
        let lse = log_sum_exp(row.iter().copied());
        loss += lse - row[g];
        for (d, &v) in dz.row_mut(i).iter_mut().zip(row) {
            *d = (v - lse).exp();
        }
        dz.row_mut(i)[g] -= 1.0;
    }
    Ok((loss, dz))
}

/// Exhaustive enumeration result.
#[derive(Debug, Clone)]
pub struct BruteForce {
    pub best_path: Vec<usize>,
    pub best_score: f64,
    pub log_partition: f64,
    /// Sum of `exp(score - log_partition)` over all paths.
    pub probability_mass: f64,
}

/// Largest number of paths [`brute_force`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Scores every one of the `L^m` paths directly from the definition.
/// Intended as a test oracle.
pub fn brute_force(z: &Tensor, a: &TransitionMatrix) -> Result<BruteForce> {
    let (m, l) = check(z, a)?;
    let paths = (l as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if paths > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleSize {
            paths,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut y = vec![0usize; m];
    let mut scores = Vec::with_capacity(paths as usize);
    let mut best_path = y.clone();
    let mut best_score = f64::NEG_INFINITY;
    loop {
        let s = path_score(z, &y, a)?;
        if s > best_score {
            best_score = s;
            best_path.clone_from(&y);
        }
        scores.push(s);
        // Odometer increment, last position fastest.
        let mut pos = m;
        loop {
            if pos == 0 {
                let log_partition = log_sum_exp(scores.iter().copied());
                let probability_mass = scores.iter().map(|s| (s - log_partition).exp()).sum();
                return Ok(BruteForce {
                    best_path,
                    best_score,
                    log_partition,
                    probability_mass,
                });
            }
            pos -= 1;
            y[pos] += 1;
            if y[pos] < l {
                break;
            }
            y[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const L: usize = 6;

    fn random_instance(rng: &mut ChaCha8Rng, m: usize) -> (Tensor, TransitionMatrix) {
        let z = Tensor::from_vec(&[m, L], (0..m * L).map(|_| rng.gen_range(-3.0..3.0)).collect())
            .unwrap();
        let mut a = TransitionMatrix::zeros(L);
        for f in 0..L + 2 {
            for t in 0..L + 2 {
                a.set(f, t, rng.gen_range(-2.0..2.0));
            }
        }
        (z, a)
    }

    /// Hand-summed score straight from the definition.
    fn direct_score(z: &Tensor, y: &[usize], a: &TransitionMatrix) -> f64 {
        let mut s = a.0.get(L, y[0]);
        for (i, &t) in y.iter().enumerate() {
            s += z.get(i, t);
        }
        for w in y.windows(2) {
            s += a.0.get(w[0], w[1]);
        }
        s + a.0.get(y[y.len() - 1], L + 1)
    }

    #[test]
    fn single_position_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (z, a) = random_instance(&mut rng, 1);
        for t in 0..L {
            let expected = z.get(0, t) + a.get(L, t) + a.get(t, L + 1);
            assert!((path_score(&z, &[t], &a).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_transitions_score_is_emission_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (z, _) = random_instance(&mut rng, 4);
        let a = TransitionMatrix::zeros(L);
        let y = [1, 4, 0, 5];
        let expected: f64 = y.iter().enumerate().map(|(i, &t)| z.get(i, t)).sum();
        assert!((path_score(&z, &y, &a).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn all_paths_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (z, a) = random_instance(&mut rng, 3);
        for p in 0..L * L * L {
            let y = [p / 36, (p / 6) % 6, p % 6];
            let s = path_score(&z, &y, &a).unwrap();
            assert!((s - direct_score(&z, &y, &a)).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let z = Tensor::zeros(&[3, L]);
        let a = TransitionMatrix::zeros(L);
        assert!(matches!(path_score(&z, &[0, 1], &a), Err(Error::Shape(_))));
        assert!(matches!(path_score(&z, &[0, 1, 6], &a), Err(Error::Shape(_))));
        assert!(log_partition(&Tensor::zeros(&[0, L]), &a).is_err());
        assert!(log_partition(&Tensor::zeros(&[2, 5]), &a).is_err());
    }

    #[test]
    fn forbidden_cells_read_as_neg_inf() {
        let mut a = TransitionMatrix::zeros(L);
        a.0.fill(1.0);
        a.pin_forbidden();
        assert_eq!(a.get(0, L), f64::NEG_INFINITY);
        assert_eq!(a.get(L + 1, 0), f64::NEG_INFINITY);
        assert_eq!(a.get(L, L + 1), f64::NEG_INFINITY);
        assert_eq!(a.0.get(0, L), 0.0);
        assert_eq!(a.get(L, 0), 1.0);
    }

    #[test]
    fn single_position_partition_is_lse() {
        let z = Tensor::from_vec(&[1, L], vec![0.5, -1.0, 2.0, 0.0, 1.0, -3.0]).unwrap();
        let a = TransitionMatrix::zeros(L);
        let expected = log_sum_exp(z.row(0).iter().copied());
        assert!((log_partition(&z, &a).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn row_shift_adds_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (mut z, a) = random_instance(&mut rng, 4);
        let before = log_partition(&z, &a).unwrap();
        z.row_mut(2).iter_mut().for_each(|v| *v += 1.75);
        assert!((log_partition(&z, &a).unwrap() - before - 1.75).abs() < 1e-10);
    }

    #[test]
    fn uniform_scores_loss_is_m_log_l() {
        let z = Tensor::filled(&[5, L], 0.3);
        let a = TransitionMatrix::zeros(L);
        let loss = nll_loss(&z, &[0, 1, 2, 3, 4], &a).unwrap();
        assert!((loss - 5.0 * (L as f64).ln()).abs() < 1e-10);
    }

    #[test]
    fn overwhelming_margin_loss_near_zero() {
        let gold = [4, 0, 1, 4];
        let mut z = Tensor::filled(&[4, L], -50.0);
        for (i, &g) in gold.iter().enumerate() {
            z.set(i, g, 50.0);
        }
        let loss = nll_loss(&z, &gold, &TransitionMatrix::zeros(L)).unwrap();
        assert!((0.0..1e-30).contains(&loss), "{loss}");
    }

    #[test]
    fn loss_matches_enumerated_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (z, a) = random_instance(&mut rng, 3);
        let gold = [2, 3, 4];
        let bf = brute_force(&z, &a).unwrap();
        let p = (direct_score(&z, &gold, &a) - bf.log_partition).exp();
        assert!((nll_loss(&z, &gold, &a).unwrap() + p.ln()).abs() < 1e-10);
    }

    #[test]
    fn viterbi_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let (z, a) = random_instance(&mut rng, 5);
            let (path, score) = viterbi(&z, &a).unwrap();
            let bf = brute_force(&z, &a).unwrap();
            assert_eq!(path, bf.best_path);
            assert!((score - bf.best_score).abs() < 1e-8);
            assert!((score - path_score(&z, &path, &a).unwrap()).abs() < 1e-12);
            assert!((log_partition(&z, &a).unwrap() - bf.log_partition).abs() < 1e-8);
            assert!((bf.probability_mass - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn viterbi_without_transitions_is_rowwise_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (z, _) = random_instance(&mut rng, 6);
        let a = TransitionMatrix::zeros(L);
        assert_eq!(viterbi(&z, &a).unwrap().0, softmax_decode(&z));
    }

    #[test]
    fn viterbi_ties_go_to_lowest_index() {
        let z = Tensor::zeros(&[3, L]);
        let a = TransitionMatrix::zeros(L);
        assert_eq!(viterbi(&z, &a).unwrap().0, vec![0, 0, 0]);
        assert_eq!(softmax_decode(&z), vec![0, 0, 0]);
    }

    #[test]
    fn viterbi_is_permutation_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (z, a) = random_instance(&mut rng, 5);
        let perm = [3, 0, 5, 1, 4, 2];
        let mut zp = Tensor::zeros(&z.shape);
        for i in 0..5 {
            for t in 0..L {
                zp.set(i, perm[t], z.get(i, t));
            }
        }
        let full = |t: usize| if t < L { perm[t] } else { t };
        let mut ap = TransitionMatrix::zeros(L);
        for f in 0..L + 2 {
            for t in 0..L + 2 {
                ap.set(full(f), full(t), a.0.get(f, t));
            }
        }
        let (y, s) = viterbi(&z, &a).unwrap();
        let (yp, sp) = viterbi(&zp, &ap).unwrap();
        assert_eq!(yp, y.iter().map(|&t| perm[t]).collect::<Vec<_>>());
        assert!((s - sp).abs() < 1e-12);
    }

    #[test]
    fn viterbi_beats_sampled_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (z, a) = random_instance(&mut rng, 12);
        let (_, best) = viterbi(&z, &a).unwrap();
        for _ in 0..1000 {
            let y: Vec<usize> = (0..12).map(|_| rng.gen_range(0..L)).collect();
            assert!(path_score(&z, &y, &a).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn softmax_decode_picks_hot_index() {
        let mut z = Tensor::filled(&[3, L], -1.0);
        z.set(0, 4, 5.0);
        z.set(1, 0, 5.0);
        z.set(2, 3, 5.0);
        assert_eq!(softmax_decode(&z), vec![4, 0, 3]);
    }

    #[test]
    fn masked_score_drops_pad_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (z, a) = random_instance(&mut rng, 5);
        let mut zr = Tensor::zeros(&[3, L]);
        for i in 0..3 {
            zr.row_mut(i).copy_from_slice(z.row(i));
        }
        let y = [1, 2, 3, 5, 5];
        let masked = path_score_masked(&z, &y, &[true, true, true, false, false], &a).unwrap();
        assert!((masked - path_score(&zr, &y[..3], &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn brute_force_single_position_and_limit() {
        let z = Tensor::from_vec(&[1, L], vec![0.5, -1.0, 2.0, 0.0, 1.0, -3.0]).unwrap();
        let a = TransitionMatrix::zeros(L);
        let bf = brute_force(&z, &a).unwrap();
        assert_eq!(bf.best_path, vec![2]);
        assert!((bf.log_partition - log_sum_exp(z.row(0).iter().copied())).abs() < 1e-12);
        assert!(matches!(
            brute_force(&Tensor::zeros(&[8, L]), &a),
            Err(Error::OracleSize { .. })
        ));
    }

    fn finite_difference_check(z: &Tensor, gold: &[usize], a: &TransitionMatrix) {
        let g = nll_with_grad(z, gold, a).unwrap();
        assert!((g.loss - nll_loss(z, gold, a).unwrap()).abs() < 1e-12);
        let h = 1e-5;
        for k in 0..z.len() {
            let mut zp = z.clone();
            zp.data[k] += h;
            let mut zm = z.clone();
            zm.data[k] -= h;
            let fd = (nll_loss(&zp, gold, a).unwrap() - nll_loss(&zm, gold, a).unwrap()) / (2.0 * h);
            let an = g.d_emissions.data[k];
            assert!((fd - an).abs() <= 1e-4 * (fd.abs() + an.abs()) + 1e-9, "dZ[{k}] {fd} vs {an}");
        }
        for k in 0..a.0.len() {
            let (f, t) = (k / a.0.cols(), k % a.0.cols());
            if a.is_forbidden(f, t) {
                assert_eq!(g.d_transitions.data[k], 0.0);
                continue;
            }
            let mut ap = a.clone();
            ap.0.data[k] += h;
            let mut am = a.clone();
            am.0.data[k] -= h;
            let fd = (nll_loss(z, gold, &ap).unwrap() - nll_loss(z, gold, &am).unwrap()) / (2.0 * h);
            let an = g.d_transitions.data[k];
            assert!((fd - an).abs() <= 1e-4 * (fd.abs() + an.abs()) + 1e-9, "dA[{f},{t}] {fd} vs {an}");
        }
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [1, 2, 4] {
            let (z, a) = random_instance(&mut rng, m);
            let gold: Vec<usize> = (0..m).map(|_| rng.gen_range(0..L)).collect();
            finite_difference_check(&z, &gold, &a);
        }
    }

    #[test]
    fn softmax_nll_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (z, _) = random_instance(&mut rng, 3);
        let gold = [0, 5, 2];
        let (loss, dz) = softmax_nll_with_grad(&z, &gold).unwrap();
        let h = 1e-6;
        for k in 0..z.len() {
            let mut zp = z.clone();
            zp.data[k] += h;
            let fd = (softmax_nll_with_grad(&zp, &gold).unwrap().0 - loss) / h;
            assert!((fd - dz.data[k]).abs() < 1e-4);
        }
    }
}
