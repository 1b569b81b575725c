//! Principal components of file space (files as points, messages as
//! coordinates) and parser space (parsers as points, per-file error totals as
//! coordinates).
//!
//! Points are mean-centered but not standardized. Variances are eigenvalues
//! of the sample covariance (divisor `P − 1`). Each component is flipped so
//! its largest-magnitude entry is positive.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::{BinaryRelationMatrix, ParserCounts};
use crate::numfmt::format_ext;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    /// `k` orthonormal directions, each of the ambient dimension `D`.
    pub components: Vec<Vec<f64>>,
    /// Nonincreasing.
    pub variances: Vec<f64>,
    pub total_variance: f64,
    /// `P × k` coordinates of the centered points.
    pub projections: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl PcaResult {
    pub fn k(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scree {
    /// All `min(P − 1, D)` covariance eigenvalues, nonincreasing.
    pub variances: Vec<f64>,
    /// Each variance over the total; all zero when the total is zero.
    pub fractions: Vec<f64>,
    pub total_variance: f64,
}

/// Top-of-spectrum eigen pairs in the ambient space.
struct Spectrum {
    /// Descending, clamped at zero, length `min(P − 1, D)`.
    values: Vec<f64>,
    /// Unit vectors in D-space for the leading values (may be shorter than
    /// `values` when a Gram route meets null directions).
    vectors: Vec<DVector<f64>>,
    total: f64,
}

fn check_shape(p: usize, d: usize, k: Option<usize>) -> Result<usize> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 points, got {p}")));
    }
    let max_k = (p - 1).min(d);
    if let Some(k) = k {
        if k == 0 || k > max_k {
            return Err(Error::InvalidArgument(format!(
                "k = {k} out of range 1..={max_k} for {p} points in dimension {d}"
            )));
        }
    }
    Ok(max_k)
}

fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    (values, vectors)
}

fn from_covariance(cov: DMatrix<f64>, p: usize) -> Spectrum {
    let d = cov.nrows();
    let total = cov.trace();
    let (values, vectors) = sorted_eigen(cov);
    let keep = (p - 1).min(d);
    Spectrum {
        values: values.into_iter().take(keep).map(|v| v.max(0.0)).collect(),
        vectors: vectors.into_iter().take(keep).collect(),
        total,
    }
}

/// Eigen pairs through the `P × P` Gram matrix; cheaper when `D > P`.
fn from_gram(centered: &DMatrix<f64>) -> Spectrum {
    let (p, d) = centered.shape();
    let scale = 1.0 / (p as f64 - 1.0);
    let gram = centered * centered.transpose() * scale;
    let total = gram.trace();
    let (values, us) = sorted_eigen(gram);
    let keep = (p - 1).min(d);
    let values: Vec<f64> = values.into_iter().take(keep).map(|v| v.max(0.0)).collect();
    let tiny = 1e-12 * total.abs().max(f64::MIN_POSITIVE);
    let mut vectors = Vec::new();
    for (v, u) in values.iter().zip(us) {
        if *v <= tiny {
            break;
        }
        let w = centered.transpose() * u;
        let norm = w.norm();
        vectors.push(w / norm);
    }
    Spectrum { values, vectors, total }
}

/// Orthonormalizes `vs` and extends it to `k` vectors with the standard
/// basis vectors that leave the largest residual.
fn complete_basis(mut vs: Vec<DVector<f64>>, k: usize, d: usize) -> Vec<DVector<f64>> {
    for i in 0..vs.len() {
        for j in 0..i {
            let proj = vs[j].dot(&vs[i]);
            let vj = vs[j].clone();
            vs[i] -= vj * proj;
        }
        let n = vs[i].norm();
        vs[i] /= n;
    }
    while vs.len() < k {
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for e in 0..d {
            let mut r = DVector::zeros(d);
            r[e] = 1.0;
            for v in &vs {
                let proj = v.dot(&r);
                r -= v * proj;
            }
            let n = r.norm();
            if n > best_norm + 1e-12 {
                best_norm = n;
                best = Some(r / n);
            }
        }
        vs.push(best.expect("dimension exceeds component count"));
    }
    vs
}

fn orient(mut v: DVector<f64>) -> Vec<f64> {
    let mut idx = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.neg_mut();
    }
    v.iter().copied().collect()
}

fn centered(points: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let (p, d) = points.shape();
    let mean: Vec<f64> = (0..d).map(|j| points.column(j).sum() / p as f64).collect();
    let c = DMatrix::from_fn(p, d, |i, j| points[(i, j)] - mean[j]);
    (c, mean)
}

fn spectrum_dense(c: &DMatrix<f64>) -> Spectrum {
    let (p, d) = c.shape();
    if d <= p {
        from_covariance(c.transpose() * c / (p as f64 - 1.0), p)
    } else {
        from_gram(c)
    }
}

fn finish(spec: Spectrum, k: usize, d: usize, mean: Vec<f64>, project: impl Fn(&[f64]) -> Vec<f64>) -> PcaResult {
    let vectors: Vec<DVector<f64>> = spec.vectors.into_iter().take(k).collect();
    let components: Vec<Vec<f64>> = complete_basis(vectors, k, d).into_iter().map(orient).collect();
    let projections = transpose(components.iter().map(|c| project(c)).collect(), k);
    PcaResult {
        components,
        variances: spec.values.into_iter().take(k).collect(),
        total_variance: spec.total,
        projections,
        mean,
    }
}

/// `per_component[i][p]` → `out[p][i]`.
fn transpose(per_component: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    let n = per_component.first().map_or(0, Vec::len);
    (0..n).map(|p| (0..k).map(|i| per_component[i][p]).collect()).collect()
}

/// PCA of a `P × D` point matrix (one point per row).
pub fn pca(points: &DMatrix<f64>, k: usize) -> Result<PcaResult> {
    let (p, d) = points.shape();
    check_shape(p, d, Some(k))?;
    let (c, mean) = centered(points);
    let spec = spectrum_dense(&c);
    Ok(finish(spec, k, d, mean, |v| {
        let v = DVector::from_column_slice(v);
        (&c * v).iter().copied().collect()
    }))
}

fn scree_from(spec: Spectrum) -> Scree {
    let fractions = if spec.total > 0.0 {
        spec.values.iter().map(|v| v / spec.total).collect()
    } else {
        vec![0.0; spec.values.len()]
    };
    Scree {
        variances: spec.values,
        fractions,
        total_variance: spec.total,
    }
}

pub fn scree(points: &DMatrix<f64>) -> Result<Scree> {
    let (p, d) = points.shape();
    check_shape(p, d, None)?;
    let (c, _) = centered(points);
    Ok(scree_from(spectrum_dense(&c)))
}

/// Sample covariance of the file columns of a binary matrix, accumulated
/// from co-occurrences without densifying the matrix.
fn binary_covariance(m: &BinaryRelationMatrix) -> (DMatrix<f64>, Vec<f64>) {
    let (n, p) = (m.n_rows(), m.n_cols());
    let mut co = DMatrix::<f64>::zeros(n, n);
    for j in 0..p {
        let ones = m.column(j);
        for (a, &ra) in ones.iter().enumerate() {
            for &rb in &ones[a..] {
                co[(ra as usize, rb as usize)] += 1.0;
            }
        }
    }
    let mean: Vec<f64> = m.row_ones().iter().map(|&c| c as f64 / p as f64).collect();
    let denom = p as f64 - 1.0;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let c = if i <= j { co[(i, j)] } else { co[(j, i)] };
        (c - p as f64 * mean[i] * mean[j]) / denom
    });
    (cov, mean)
}

/// File-space PCA: one point per column, one coordinate per message.
pub fn project_files(m: &BinaryRelationMatrix, k: usize) -> Result<PcaResult> {
    let (p, d) = (m.n_cols(), m.n_rows());
    check_shape(p, d, Some(k))?;
    let (cov, mean) = binary_covariance(m);
    let spec = from_covariance(cov, p);
    Ok(finish(spec, k, d, mean.clone(), |v| {
        let offset: f64 = v.iter().zip(&mean).map(|(a, b)| a * b).sum();
        (0..p)
            .map(|j| m.column(j).iter().map(|&r| v[r as usize]).sum::<f64>() - offset)
            .collect()
    }))
}

pub fn scree_files(m: &BinaryRelationMatrix) -> Result<Scree> {
    check_shape(m.n_cols(), m.n_rows(), None)?;
    let (cov, _) = binary_covariance(m);
    Ok(scree_from(from_covariance(cov, m.n_cols())))
}

fn parser_points(agg: &ParserCounts) -> DMatrix<f64> {
    DMatrix::from_fn(agg.parsers.len(), agg.cols.len(), |i, j| agg.counts[i][j] as f64)
}

/// Parser-space PCA: one point per parser, one coordinate per file (raw
/// message totals).
pub fn project_parsers(agg: &ParserCounts, k: usize) -> Result<PcaResult> {
    pca(&parser_points(agg), k)
}

pub fn scree_parsers(agg: &ParserCounts) -> Result<Scree> {
    scree(&parser_points(agg))
}

/// Writes `point_id,pc1,pc2,pc3`. Coordinates beyond `k` are written as 0.
pub fn write_projections<W: Write>(ids: &[String], r: &PcaResult, w: W) -> Result<()> {
    if ids.len() != r.projections.len() {
        return Err(Error::InvalidArgument("one id per projected point required".into()));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["point_id", "pc1", "pc2", "pc3"])?;
    for (id, coords) in ids.iter().zip(&r.projections) {
        let mut rec = vec![id.clone()];
        rec.extend((0..3).map(|i| format_ext(coords.get(i).copied().unwrap_or(0.0))));
        wtr.write_record(rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_projections<R: std::io::Read>(r: R) -> Result<Vec<(String, [f64; 3])>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut xyz = [0.0; 3];
        for (c, slot) in xyz.iter_mut().enumerate() {
            *slot = rec
                .get(c + 1)
                .and_then(crate::numfmt::parse_ext)
                .ok_or_else(|| Error::parse(i + 2, "bad coordinate"))?;
        }
        out.push((rec.get(0).unwrap_or("").to_string(), xyz));
    }
    Ok(out)
}

/// Writes `index,variance,fraction` with 1-based indices.
pub fn write_scree<W: Write>(s: &Scree, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "variance", "fraction"])?;
    for (i, (v, f)) in s.variances.iter().zip(&s.fractions).enumerate() {
        wtr.write_record([(i + 1).to_string(), format_ext(*v), format_ext(*f)])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_scree<R: std::io::Read>(r: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| {
            rec.get(k)
                .and_then(crate::numfmt::parse_ext)
                .ok_or_else(|| Error::parse(i + 2, "bad number"))
        };
        out.push((num(1)?, num(2)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ColumnId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    fn diamond() -> DMatrix<f64> {
        m(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]])
    }

    fn assert_orthonormal(c: &[Vec<f64>], tol: f64) {
        for i in 0..c.len() {
            for j in 0..c.len() {
                let dot: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < tol, "<c{i}, c{j}> = {dot}");
            }
        }
    }

    fn sample_var(x: &[f64]) -> f64 {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
    }

    #[test]
    fn square_corners() {
        let r = pca(&diamond(), 2).unwrap();
        for v in &r.variances {
            assert!((v - 2.0 / 3.0).abs() < 1e-12);
        }
        assert_orthonormal(&r.components, 1e-12);
        let s = scree(&diamond()).unwrap();
        assert_eq!(s.fractions.len(), 2);
        for f in &s.fractions {
            assert!((f - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_line() {
        let pts = m(&[&[0.0, 0.0], &[1.0, 2.0], &[2.0, 4.0], &[-1.0, -2.0]]);
        let r = pca(&pts, 1).unwrap();
        assert!((r.variances[0] - r.total_variance).abs() < 1e-12 * r.total_variance);
        let s = scree(&pts).unwrap();
        assert!((s.fractions[0] - 1.0).abs() < 1e-12);
        assert!(s.fractions[1].abs() < 1e-12);
        // sign convention
        let c = &r.components[0];
        assert!(c[1] > 0.0 && (c[0] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(pca(&m(&[&[1.0, 2.0]]), 1).is_err());
        assert!(pca(&diamond(), 0).is_err());
        assert!(pca(&diamond(), 3).is_err());
    }

    #[test]
    fn identical_columns_project_to_origin() {
        let cols = vec![vec![true, false, true], vec![true, false, true]];
        let b = BinaryRelationMatrix::from_dense_columns("t", 3, &cols);
        let r = project_files(&b, 1).unwrap();
        assert_eq!(r.variances, vec![0.0]);
        assert!(r.projections.iter().flatten().all(|x| x.abs() < 1e-15));
        assert_orthonormal(&r.components, 1e-12);
        let s = scree_files(&b).unwrap();
        assert_eq!(s.fractions, vec![0.0]);
    }

    #[test]
    fn file_projection_matches_dense_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cols: Vec<Vec<bool>> = (0..40).map(|_| (0..6).map(|_| rng.random_bool(0.3)).collect()).collect();
        let b = BinaryRelationMatrix::from_dense_columns("t", 6, &cols);
        let dense = DMatrix::from_fn(40, 6, |i, j| if cols[i][j] { 1.0 } else { 0.0 });
        let r1 = project_files(&b, 3).unwrap();
        let r2 = pca(&dense, 3).unwrap();
        for (a, b) in r1.variances.iter().zip(&r2.variances) {
            assert!((a - b).abs() < 1e-12);
        }
        for (p, q) in r1.projections.iter().flatten().zip(r2.projections.iter().flatten()) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn parser_space_two_points() {
        let agg = ParserCounts {
            parsers: vec!["quiet".into(), "loud".into()],
            cols: (1..=4).map(ColumnId::plain).collect(),
            counts: vec![vec![0, 0, 0, 0], vec![1, 1, 1, 1]],
        };
        let r = project_parsers(&agg, 1).unwrap();
        // the single component runs through both points
        for c in &r.components[0] {
            assert!((c - 0.5).abs() < 1e-12);
        }
        assert!((r.projections[0][0] + 1.0).abs() < 1e-12);
        assert!((r.projections[1][0] - 1.0).abs() < 1e-12);

        let same = ParserCounts {
            counts: vec![vec![2, 0, 1, 0], vec![2, 0, 1, 0]],
            ..agg
        };
        let r = project_parsers(&same, 1).unwrap();
        assert_eq!(r.projections[0], r.projections[1]);
        assert_orthonormal(&r.components, 1e-12);
    }

    #[test]
    fn isotropic_cloud() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts = DMatrix::from_fn(10_000, 3, |_, _| StandardNormal.sample(&mut rng));
        let r = pca(&pts, 3).unwrap();
        for v in &r.variances {
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn csv_round_trips() {
        let r = pca(&diamond(), 2).unwrap();
        let ids: Vec<String> = (1..=4).map(|i| i.to_string()).collect();
        let mut buf = Vec::new();
        write_projections(&ids, &r, &mut buf).unwrap();
        let back = read_projections(&buf[..]).unwrap();
        assert_eq!(back.len(), 4);
        for ((id, xyz), p) in back.iter().zip(&r.projections) {
            assert!(ids.contains(id));
            assert_eq!(xyz[0], p[0]);
            assert_eq!(xyz[1], p[1]);
            assert_eq!(xyz[2], 0.0);
        }
        let s = scree(&diamond()).unwrap();
        let mut buf = Vec::new();
        write_scree(&s, &mut buf).unwrap();
        let back = read_scree(&buf[..]).unwrap();
        assert_eq!(back, s.variances.iter().copied().zip(s.fractions.iter().copied()).collect::<Vec<_>>());
    }

    fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        a.qr().q()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn projection_variance_identity(seed in any::<u64>(), p in 3usize..25, d in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = DMatrix::from_fn(p, d, |_, _| rng.random_range(-3.0..3.0));
            let k = (p - 1).min(d).min(3);
            let r = pca(&pts, k).unwrap();
            assert_orthonormal(&r.components, 1e-9);
            for i in 0..k {
                let col: Vec<f64> = r.projections.iter().map(|x| x[i]).collect();
                let v = sample_var(&col);
                prop_assert!((v - r.variances[i]).abs() <= 1e-9 * r.total_variance.max(1.0));
            }
            for w in r.variances.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            let s: f64 = r.variances.iter().sum();
            prop_assert!(s <= r.total_variance * (1.0 + 1e-9));
            let sc = scree(&pts).unwrap();
            prop_assert!((sc.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotation_equivariance(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (p, d) = (15, 4);
            // anisotropic cloud so eigenvalues are well separated
            let scales = [4.0, 2.0, 1.0, 0.5];
            let pts = DMatrix::from_fn(p, d, |_, j| rng.random_range(-1.0..1.0) * scales[j]);
            let q = random_orthogonal(d, &mut rng);
            let rotated = &pts * q.transpose();
            let a = pca(&pts, 3).unwrap();
            let b = pca(&rotated, 3).unwrap();
            for (x, y) in a.variances.iter().zip(&b.variances) {
                prop_assert!((x - y).abs() < 1e-8 * (1.0 + x.abs()));
            }
            for (ca, cb) in a.components.iter().zip(&b.components) {
                let rc = &q * DVector::from_column_slice(ca);
                let dot: f64 = rc.iter().zip(cb).map(|(u, v)| u * v).sum();
                prop_assert!((dot.abs() - 1.0).abs() < 1e-8);
            }
        }

        #[test]
        fn duplicating_points_keeps_directions(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scales = [3.0, 1.5, 0.5];
            let pts = DMatrix::from_fn(10, 3, |_, j| rng.random_range(-1.0..1.0) * scales[j]);
            let doubled = DMatrix::from_fn(20, 3, |i, j| pts[(i % 10, j)]);
            let a = pca(&pts, 2).unwrap();
            let b = pca(&doubled, 2).unwrap();
            for (ca, cb) in a.components.iter().zip(&b.components) {
                let dot: f64 = ca.iter().zip(cb).map(|(u, v)| u * v).sum();
                prop_assert!((dot.abs() - 1.0).abs() < 1e-8);
            }
            // sum of squares is doubled, divisor goes from 9 to 19
            for (x, y) in a.variances.iter().zip(&b.variances) {
                prop_assert!((y - x * 2.0 * 9.0 / 19.0).abs() < 1e-9 * (1.0 + x));
            }
        }
    }
}
