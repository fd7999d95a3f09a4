//! Dense linear assignment by shortest augmenting paths (Jonker-Volgenant).
//!
//! Costs are evaluated lazily through a closure, so nothing of size `n^2`
//! is ever allocated. After the optimum is found, ties are resolved to
//! the lexicographically smallest assignment by walking alternating paths
//! in the subgraph of tight (zero reduced cost) edges.

// row and column indices are the algorithm's vocabulary
#![allow(clippy::needless_range_loop)]

const NONE: usize = usize::MAX;

pub(crate) struct LapSolution {
    pub row_to_col: Vec<usize>,
    pub v: Vec<f64>,
}

pub(crate) fn solve<C>(n: usize, cost: C, warm_v: Option<&[f64]>) -> LapSolution
where
    C: Fn(usize, usize) -> f64,
{
    let mut x = vec![NONE; n];
    let mut y = vec![NONE; n];
    let mut v = vec![0.0f64; n];
    if n == 0 {
        return LapSolution { row_to_col: x, v };
    }

    match warm_v {
        Some(w) => {
            v.copy_from_slice(w);
            for i in 0..n {
                let mut best = f64::INFINITY;
                let mut jbest = 0;
                for (j, &vj) in v.iter().enumerate() {
                    let r = cost(i, j) - vj;
                    if r < best {
                        best = r;
                        jbest = j;
                    }
                }
                if y[jbest] == NONE {
                    x[i] = jbest;
                    y[jbest] = i;
                }
            }
        }
        None => column_reduction(n, &cost, &mut x, &mut y, &mut v),
    }

    let free_rows: Vec<usize> = (0..n).filter(|&i| x[i] == NONE).collect();
    if !free_rows.is_empty() {
        let mut d = vec![0.0f64; n];
        let mut pred = vec![0usize; n];
        let mut collist: Vec<usize> = (0..n).collect();
        for f in free_rows {
            augment(
                n,
                &cost,
                f,
                &mut x,
                &mut y,
                &mut v,
                &mut d,
                &mut pred,
                &mut collist,
            );
        }
    }

    refine_lexicographic(n, &cost, &mut x, &mut y, &v);
    LapSolution { row_to_col: x, v }
}

fn column_reduction<C: Fn(usize, usize) -> f64>(
    n: usize,
    cost: &C,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
) {
    let mut matches = vec![0u32; n];
    for j in (0..n).rev() {
        let mut imin = 0;
        let mut min = cost(0, j);
        for i in 1..n {
            let c = cost(i, j);
            if c < min {
                min = c;
                imin = i;
            }
        }
        v[j] = min;
        matches[imin] += 1;
        if matches[imin] == 1 {
            x[imin] = j;
            y[j] = imin;
        }
    }
    // reduction transfer: rows owned by a single column pass their slack on
    for i in 0..n {
        if matches[i] != 1 {
            continue;
        }
        let j1 = x[i];
        let mut min = f64::INFINITY;
        for j in 0..n {
            if j != j1 {
                min = min.min(cost(i, j) - v[j]);
            }
        }
        if min.is_finite() {
            v[j1] -= min;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn augment<C: Fn(usize, usize) -> f64>(
    n: usize,
    cost: &C,
    free_row: usize,
    x: &mut [usize],
    y: &mut [usize],
    v: &mut [f64],
    d: &mut [f64],
    pred: &mut [usize],
    collist: &mut [usize],
) {
    for j in 0..n {
        d[j] = cost(free_row, j) - v[j];
        pred[j] = free_row;
        collist[j] = j;
    }
    // collist[..low] scanned, collist[low..up] at the current minimum
    let mut low = 0usize;
    let mut up = 0usize;
    let mut last = 0usize;
    let mut min = 0.0f64;
    let endofpath;
    'search: loop {
        if up == low {
            last = low;
            min = d[collist[up]];
            up += 1;
            // the range is fixed on entry; `up` grows inside on purpose
            #[allow(clippy::mut_range_bound)]
            for k in up..n {
                let j = collist[k];
                let h = d[j];
                if h <= min {
                    if h < min {
                        up = low;
                        min = h;
                    }
                    collist[k] = collist[up];
                    collist[up] = j;
                    up += 1;
                }
            }
            for &j in &collist[low..up] {
                if y[j] == NONE {
                    endofpath = j;
                    break 'search;
                }
            }
        }
        let j1 = collist[low];
        low += 1;
        let i = y[j1];
        let u1 = cost(i, j1) - v[j1] - min;
        let mut k = up;
        while k < n {
            let j = collist[k];
            let v2 = cost(i, j) - v[j] - u1;
            if v2 < d[j] {
                pred[j] = i;
                if v2 == min {
                    if y[j] == NONE {
                        endofpath = j;
                        break 'search;
                    }
                    collist[k] = collist[up];
                    collist[up] = j;
                    up += 1;
                }
                d[j] = v2;
            }
            k += 1;
        }
    }
    // price update on the scanned columns
    for &j in &collist[..last] {
        v[j] += d[j] - min;
    }
    let mut j = endofpath;
    loop {
        let i = pred[j];
        y[j] = i;
        let prev = x[i];
        x[i] = j;
        if i == free_row {
            break;
        }
        j = prev;
    }
}

/// Rewrites an optimal assignment into the lexicographically smallest one
/// among all optimal assignments.
fn refine_lexicographic<C: Fn(usize, usize) -> f64>(
    n: usize,
    cost: &C,
    x: &mut [usize],
    y: &mut [usize],
    v: &[f64],
) {
    let u: Vec<f64> = (0..n).map(|i| cost(i, x[i]) - v[x[i]]).collect();
    let scale = u
        .iter()
        .chain(v.iter())
        .fold(1.0f64, |m, &t| m.max(t.abs()));
    let tol = 1e-11 * scale;

    let mut tight: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut extra = false;
    for i in 0..n {
        let row: Vec<usize> = (0..n)
            .filter(|&j| cost(i, j) - u[i] - v[j] <= tol)
            .collect();
        extra |= row.len() > 1 || row.first() != Some(&x[i]);
        tight.push(row);
    }
    if !extra {
        return;
    }
    for i in 0..n {
        if !tight[i].contains(&x[i]) {
            tight[i].push(x[i]);
            tight[i].sort_unstable();
        }
    }

    let mut via = vec![NONE; n];
    let mut seen = vec![usize::MAX; n];
    let mut queue = Vec::new();
    for i in 0..n {
        let target = x[i];
        let candidates: Vec<usize> = tight[i].iter().copied().filter(|&j| j < target).collect();
        for j in candidates {
            let r = y[j];
            if r < i {
                continue;
            }
            // find an alternating path from row r that frees `target`,
            // touching only rows after i
            queue.clear();
            queue.push(r);
            seen[r] = i * n + j;
            via[r] = NONE;
            let mut end = NONE;
            let mut head = 0;
            while head < queue.len() && end == NONE {
                let a = queue[head];
                head += 1;
                for &b in &tight[a] {
                    if b == x[a] {
                        continue;
                    }
                    if b == target {
                        end = a;
                        break;
                    }
                    let nr = y[b];
                    if nr > i && seen[nr] != i * n + j {
                        seen[nr] = i * n + j;
                        via[nr] = a;
                        queue.push(nr);
                    }
                }
            }
            if end == NONE {
                continue;
            }
            let mut row = end;
            let mut col = target;
            loop {
                let old = x[row];
                x[row] = col;
                y[col] = row;
                if row == r {
                    break;
                }
                col = old;
                row = via[row];
            }
            x[i] = j;
            y[j] = i;
            break;
        }
    }
}
