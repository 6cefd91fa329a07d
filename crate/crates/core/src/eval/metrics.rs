//! Partition agreement scores: normalized mutual information and
//! Hungarian-matched clustering accuracy.

use crate::data::LabelVector;
use crate::error::{invalid, Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Contingency table with rows indexed by `a`'s compacted ids and columns by `b`'s.
fn contingency(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let compact = |v: &[usize]| {
        let mut ids = v.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mapped: Vec<usize> = v.iter().map(|x| ids.binary_search(x).unwrap()).collect();
        (mapped, ids.len())
    };
    let (ca, ra) = compact(a);
    let (cb, rb) = compact(b);
    let mut table = vec![vec![0usize; rb]; ra];
    for (&x, &y) in ca.iter().zip(&cb) {
        table[x][y] += 1;
    }
    (table, ra, rb)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// NMI of two labelings, normalized by the geometric mean of their entropies.
pub fn nmi_classes(a: &[usize], b: &[usize]) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    if a.is_empty() {
        return Err(invalid("NMI of empty labelings"));
    }
    let n = a.len() as f64;
    let (table, ra, rb) = contingency(a, b);
    let row: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<usize> = (0..rb).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let ha = entropy(row.iter().copied(), n);
    let hb = entropy(col.iter().copied(), n);
    if ra == 1 && rb == 1 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    // sum over cells in a fixed order so nmi(a, b) and nmi(b, a) agree bit for bit
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for (i, r) in table.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            if c > 0 {
                cells.push((c, row[i].min(col[j]), row[i].max(col[j])));
            }
        }
    }
    cells.sort_unstable();
    let mi: f64 = cells
        .iter()
        .map(|&(c, r1, r2)| {
            let pij = c as f64 / n;
            pij * (c as f64 * n / (r1 as f64 * r2 as f64)).ln()
        })
        .sum();
    let (lo, hi) = if ha <= hb { (ha, hb) } else { (hb, ha) };
    Ok((mi / (lo * hi).sqrt()).clamp(0.0, 1.0))
}

/// NMI of two fully labeled vectors.
pub fn nmi(a: &LabelVector, b: &LabelVector) -> Result<f64> {
    check_lengths(a.len(), b.len())?;
    nmi_classes(&a.classes()?, &b.classes()?)
}

/// Minimum-cost perfect matching on a square cost matrix. Returns, for each
/// row, the column assigned to it.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // potentials formulation with 1-based sentinel column 0
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
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
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of samples agreeing after the best one-to-one matching of predicted clusters to classes.
pub fn clustering_accuracy_classes(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(invalid("accuracy of empty labelings"));
    }
    let (table, rp, rt) = contingency(pred, truth);
    let c = rp.max(rt);
    let max = table.iter().flatten().copied().max().unwrap_or(0) as f64;
    let cost: Vec<Vec<f64>> = (0..c)
        .map(|i| {
            (0..c)
                .map(|j| {
                    let w = if i < rp && j < rt { table[i][j] as f64 } else { 0.0 };
                    max - w
                })
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(i, &j)| i < rp && j < rt)
        .map(|(i, &j)| table[i][j])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

pub fn clustering_accuracy(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    clustering_accuracy_classes(&pred.classes()?, &truth.classes()?)
}
