//! Exact Euclidean distance transform on a boolean feature grid.
//!
//! Meijster's two-pass algorithm, evaluated entirely in integers so the
//! squared distances are exact: a column scan builds the vertical distance
//! `g`, then each row computes the lower envelope of the parabolas
//! `(x - i)^2 + g(i)^2`.

use crate::grid::Grid;

/// Squared distance marker for grids with no feature cell at all.
pub const NO_FEATURE: u64 = u64::MAX;

/// Squared distance, in cell units, from every cell center to the nearest
/// feature cell center. Feature cells get 0; if the grid holds no feature
/// every entry is [`NO_FEATURE`].
pub fn squared_distance_transform(features: &Grid<bool>) -> Grid<u64> {
    let rows = features.rows();
    let cols = features.cols();
    if rows == 0 || cols == 0 {
        return Grid::filled(rows, cols, NO_FEATURE);
    }
    if !features.iter().any(|&f| f) {
        return Grid::filled(rows, cols, NO_FEATURE);
    }

    // Larger than any in-grid distance; squared stays far below i64 overflow.
    let inf = (rows + cols) as i64;

    // Phase 1: per column, distance to the nearest feature in that column.
    let mut g = Grid::filled(rows, cols, inf);
    for c in 0..cols {
        g[(0, c)] = if features[(0, c)] { 0 } else { inf };
        for r in 1..rows {
            g[(r, c)] = if features[(r, c)] {
                0
            } else {
                (g[(r - 1, c)] + 1).min(inf)
            };
        }
        for r in (0..rows - 1).rev() {
            let below = g[(r + 1, c)];
            if below < g[(r, c)] {
                g[(r, c)] = below + 1;
            }
        }
    }

    // Phase 2: per row, lower envelope of parabolas.
    let mut out = Grid::filled(rows, cols, NO_FEATURE);
    let mut s = vec![0usize; cols];
    let mut t = vec![0i64; cols];
    for r in 0..rows {
        let gr = g.row(r);
        let f = |x: i64, i: usize| -> i64 {
            let gi = gr[i];
            (x - i as i64) * (x - i as i64) + gi * gi
        };
        let sep = |i: usize, u: usize| -> i64 {
            let (ii, uu) = (i as i64, u as i64);
            let (gi, gu) = (gr[i], gr[u]);
            (uu * uu - ii * ii + gu * gu - gi * gi).div_euclid(2 * (uu - ii))
        };

        let mut q: usize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..cols {
            while f(t[q], s[q]) > f(t[q], u) {
                if q == 0 {
                    break;
                }
                q -= 1;
            }
            // Re-check at q == 0 since the loop above can stop there with the
            // parabola still dominated.
            if f(t[q], s[q]) > f(t[q], u) {
                s[0] = u;
                q = 0;
                t[0] = 0;
            } else {
                let w = 1 + sep(s[q], u);
                if w < cols as i64 {
                    q += 1;
                    s[q] = u;
                    t[q] = w;
                }
            }
        }
        for u in (0..cols).rev() {
            let d = f(u as i64, s[q]);
            out[(r, u)] = d as u64;
            if u as i64 == t[q] && q > 0 {
                q -= 1;
            }
        }
    }
    out
}

/// Euclidean distance in meters from squared cell distance; `+inf` when no
/// feature exists.
#[inline]
pub fn to_meters(sq_cells: u64, cell_m: f64) -> f64 {
    if sq_cells == NO_FEATURE {
        f64::INFINITY
    } else {
        (sq_cells as f64).sqrt() * cell_m
    }
}
