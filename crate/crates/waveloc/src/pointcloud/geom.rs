//! Planar geometry for tile boundaries: convex hulls, areas, and
//! convex-polygon intersection tests.

/// Cross product of (a - o) x (b - o); positive when o->a->b turns left.
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by monotone chain, counter-clockwise, collinear points
/// dropped. Degenerate inputs yield fewer than three vertices: a single
/// point for coincident input, the two extreme endpoints for collinear input.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let n = pts.len();
    if n <= 2 {
        return pts;
    }

    // monotone chain: lower hull then upper hull
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop(); // last point repeats the first
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    hull
}

/// Shoelace area of a simple polygon (absolute value, so orientation-free).
pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        s += a.0 * b.1 - b.0 * a.1;
    }
    s.abs() / 2.0
}

/// True when `p` lies inside or on a counter-clockwise convex polygon.
pub fn point_in_convex(poly: &[(f64, f64)], p: (f64, f64), eps: f64) -> bool {
    match poly.len() {
        0 => false,
        1 => (p.0 - poly[0].0).abs() <= eps && (p.1 - poly[0].1).abs() <= eps,
        2 => {
            // distance from the segment
            let (a, b) = (poly[0], poly[1]);
            let (vx, vy) = (b.0 - a.0, b.1 - a.1);
            let len2 = vx * vx + vy * vy;
            let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0);
            let (cx, cy) = (a.0 + t * vx, a.1 + t * vy);
            ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt() <= eps
        }
        _ => {
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                if cross(a, b, p) < -eps {
                    return false;
                }
            }
            true
        }
    }
}

/// Axis-aligned square of side `side_m` centered on `(cx, cy)`, CCW.
pub fn centered_square(cx: f64, cy: f64, side_m: f64) -> [(f64, f64); 4] {
    let h = side_m / 2.0;
    [
        (cx - h, cy - h),
        (cx + h, cy - h),
        (cx + h, cy + h),
        (cx - h, cy + h),
    ]
}

/// Separating-axis intersection test between two convex polygons. Polygons
/// may be degenerate (one or two vertices); touching counts as intersecting.
pub fn convex_intersects(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let mut axes: Vec<(f64, f64)> = Vec::new();
    for poly in [a, b] {
        let n = poly.len();
        if n == 1 {
            continue;
        }
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let (ex, ey) = (q.0 - p.0, q.1 - p.1);
            if ex == 0.0 && ey == 0.0 {
                continue;
            }
            axes.push((-ey, ex));
            if n == 2 {
                // a segment also needs its own direction as an axis
                axes.push((ex, ey));
                break;
            }
        }
    }
    if axes.is_empty() {
        // both degenerate to points
        return a[0] == b[0];
    }
    for (ax, ay) in axes {
        let project = |poly: &[(f64, f64)]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &(x, y) in poly {
                let d = x * ax + y * ay;
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (lo, hi)
        };
        let (alo, ahi) = project(a);
        let (blo, bhi) = project(b);
        if ahi < blo || bhi < alo {
            return false;
        }
    }
    true
}
