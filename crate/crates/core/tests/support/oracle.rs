//! Reference implementations written independently of the library.

use std::collections::BTreeMap;

use nestsim::world::{BlockPos, Cell, WorldState};

/// Whether the open segment `a`-`b` passes through the open interior of
/// `cell`, by intersecting the per-axis parameter slabs. Evaluated from the
/// lexicographically smaller endpoint.
pub fn crosses(cell: BlockPos, a: [f64; 3], b: [f64; 3]) -> bool {
    let (f, t) = if a <= b { (a, b) } else { (b, a) };
    let c = [cell.x, cell.y, cell.z].map(f64::from);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..3 {
        let d = t[k] - f[k];
        if d == 0.0 {
            if f[k].floor() != c[k] {
                return false;
            }
            continue;
        }
        let (t0, t1) = ((c[k] - f[k]) / d, (c[k] + 1.0 - f[k]) / d);
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    lo < hi
}

/// Exhaustive occluder scan: blocked iff some opaque cell other than the
/// two endpoint cells is crossed.
pub fn line_of_sight(w: &WorldState, from: [f64; 3], to: [f64; 3], radius: f64) -> bool {
    let dist = (0..3)
        .map(|k| (to[k] - from[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    if dist > radius {
        return false;
    }
    let ends = [from, to].map(|p| {
        BlockPos::new(
            p[0].floor() as i32,
            p[1].floor() as i32,
            p[2].floor() as i32,
        )
    });
    !w.cells
        .iter()
        .any(|(p, c)| c.is_opaque() && !ends.contains(p) && crosses(*p, from, to))
}

/// Every item in the world, counting placed blocks as one item each.
pub fn item_totals(w: &WorldState) -> BTreeMap<String, i64> {
    let mut t = BTreeMap::new();
    let mut add = |k: &str, n: i64| *t.entry(k.to_string()).or_insert(0) += n;
    for body in w.agents.values() {
        for (k, n) in body.inventory.iter().flatten() {
            add(k, i64::from(*n));
        }
    }
    for c in w.containers.values() {
        for (k, n) in c.contents.iter().flatten() {
            add(k, i64::from(*n));
        }
    }
    for cell in w.cells.values() {
        match cell {
            Cell::Opaque(name) => add(name, 1),
            Cell::Lever => add("lever", 1),
            _ => {}
        }
    }
    t.retain(|_, n| *n != 0);
    t
}
