//! Triangulated spatial mesh in projected kilometre coordinates.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};

/// Mean Earth radius in km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Equirectangular projection about a reference point, in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoProjection {
    pub lon0: f64,
    pub lat0: f64,
}

impl GeoProjection {
    /// Projection centred on the mean of the given (lon, lat) points.
    pub fn centred_on(points: &[(f64, f64)]) -> Self {
        let n = points.len().max(1) as f64;
        GeoProjection {
            lon0: points.iter().map(|p| p.0).sum::<f64>() / n,
            lat0: points.iter().map(|p| p.1).sum::<f64>() / n,
        }
    }

    pub fn forward(&self, lon: f64, lat: f64) -> [f64; 2] {
        let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        [k * (lon - self.lon0) * self.lat0.to_radians().cos(), k * (lat - self.lat0)]
    }

    pub fn inverse(&self, p: [f64; 2]) -> (f64, f64) {
        let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        (self.lon0 + p[0] / (k * self.lat0.to_radians().cos()), self.lat0 + p[1] / k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshParams {
    /// Longest allowed edge for triangles inside the convex hull of the data.
    pub max_edge_km: f64,
    /// Longest allowed edge in the outer extension.
    pub outer_max_edge_km: f64,
    /// Width of the extension band around the data hull.
    pub extension_km: f64,
    /// Input points closer than this to an already kept point are merged into it.
    pub cutoff_km: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            max_edge_km: 75.0,
            outer_max_edge_km: 300.0,
            extension_km: 150.0,
            cutoff_km: 10.0,
        }
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Whether `p` lies in the closed counter-clockwise convex polygon, with slack `eps` km.
fn in_convex(poly: &[[f64; 2]], p: [f64; 2], eps: f64) -> bool {
    let n = poly.len();
    (0..n).all(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        cross(a, b, p) / dist(a, b) >= -eps
    })
}

/// Outer boundary: the hull offset outward by `width`, with rounded corners, resampled so
/// consecutive points are at most `max_edge` apart.
fn offset_boundary(hull: &[[f64; 2]], width: f64, max_edge: f64) -> Vec<[f64; 2]> {
    let n = hull.len();
    let normal = |a: [f64; 2], b: [f64; 2]| {
        let l = dist(a, b);
        [(b[1] - a[1]) / l, -(b[0] - a[0]) / l]
    };
    let mut ring = Vec::new();
    for i in 0..n {
        let prev = hull[(i + n - 1) % n];
        let cur = hull[i];
        let next = hull[(i + 1) % n];
        let n0 = normal(prev, cur);
        let n1 = normal(cur, next);
        let a0 = n0[1].atan2(n0[0]);
        let mut a1 = n1[1].atan2(n1[0]);
        while a1 < a0 {
            a1 += std::f64::consts::TAU;
        }
        let steps = ((a1 - a0) / 20f64.to_radians()).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let a = a0 + (a1 - a0) * s as f64 / steps as f64;
            ring.push([cur[0] + width * a.cos(), cur[1] + width * a.sin()]);
        }
    }
    // Merge near-coincident points, then resample long edges.
    let mut merged: Vec<[f64; 2]> = Vec::new();
    for p in ring {
        if merged.last().is_none_or(|&q| dist(p, q) > 1e-6 * width.max(1.0)) {
            merged.push(p);
        }
    }
    if merged.len() > 1 && dist(merged[0], *merged.last().expect("nonempty")) <= 1e-6 * width.max(1.0) {
        merged.pop();
    }
    let hull = convex_hull(&merged);
    let m = hull.len();
    let mut out = Vec::new();
    for i in 0..m {
        let (a, b) = (hull[i], hull[(i + 1) % m]);
        let pieces = (dist(a, b) / max_edge).ceil().max(1.0) as usize;
        for k in 0..pieces {
            let t = k as f64 / pieces as f64;
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Uniform bucket grid over triangle bounding boxes for point location.
#[derive(Debug, Clone)]
struct Locator {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mesh {
    pub projection: GeoProjection,
    /// Vertex coordinates in projected km.
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Outer boundary vertex indices, counter-clockwise.
    pub boundary: Vec<usize>,
    /// Number of leading vertices that come from (deduplicated) input locations.
    pub input_vertices: usize,
    #[serde(skip)]
    locator: OnceLock<Locator>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.projection == other.projection
            && self.vertices == other.vertices
            && self.triangles == other.triangles
            && self.boundary == other.boundary
            && self.input_vertices == other.input_vertices
    }
}

/// JSON exchange form of a mesh, carrying geographic vertex positions as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshJson {
    pub projection: GeoProjection,
    pub vertices_km: Vec<[f64; 2]>,
    pub vertices_lonlat: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<usize>,
    pub input_vertices: usize,
}

impl Mesh {
    /// Assemble and validate a mesh; triangles are reoriented counter-clockwise.
    pub fn from_parts(
        projection: GeoProjection,
        vertices: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        boundary: Vec<usize>,
        input_vertices: usize,
    ) -> Result<Self> {
        let n = vertices.len();
        if triangles.is_empty() {
            return Err(Error::Mesh("mesh has no triangles".into()));
        }
        for t in triangles.iter_mut() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::Mesh(format!("triangle {t:?} references a missing vertex")));
            }
            let area = cross(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if area.abs() <= 1e-12 {
                return Err(Error::Mesh(format!("degenerate triangle {t:?}")));
            }
            if area < 0.0 {
                t.swap(1, 2);
            }
        }
        if boundary.iter().any(|&v| v >= n) || input_vertices > n {
            return Err(Error::Mesh("boundary references a missing vertex".into()));
        }
        Ok(Mesh {
            projection,
            vertices,
            triangles,
            boundary,
            input_vertices,
            locator: OnceLock::new(),
        })
    }

    /// Regular grid of `nx * ny` vertices with the given spacing, each square split in two.
    pub fn regular_grid(nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        if nx < 2 || ny < 2 || !(spacing > 0.0) {
            return Err(Error::Mesh("grid needs at least 2x2 vertices and positive spacing".into()));
        }
        let idx = |i: usize, j: usize| j * nx + i;
        let vertices = (0..ny)
            .flat_map(|j| (0..nx).map(move |i| [i as f64 * spacing, j as f64 * spacing]))
            .collect();
        let mut triangles = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        let mut boundary: Vec<usize> = (0..nx).map(|i| idx(i, 0)).collect();
        boundary.extend((1..ny).map(|j| idx(nx - 1, j)));
        boundary.extend((0..nx - 1).rev().map(|i| idx(i, ny - 1)));
        boundary.extend((1..ny - 1).rev().map(|j| idx(0, j)));
        Mesh::from_parts(GeoProjection { lon0: 0.0, lat0: 0.0 }, vertices, triangles, boundary, nx * ny)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * cross(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn vertex_lonlat(&self, v: usize) -> (f64, f64) {
        self.projection.inverse(self.vertices[v])
    }

    /// Largest distance between two vertices.
    pub fn diameter(&self) -> f64 {
        let hull = convex_hull(&self.vertices);
        let mut d: f64 = 0.0;
        for (i, &a) in hull.iter().enumerate() {
            for &b in &hull[i + 1..] {
                d = d.max(dist(a, b));
            }
        }
        d
    }

    fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| {
            let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for v in &self.vertices {
                for k in 0..2 {
                    lo[k] = lo[k].min(v[k]);
                    hi[k] = hi[k].max(v[k]);
                }
            }
            let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
            let target = (self.triangles.len() as f64).sqrt().ceil().max(1.0);
            let cell = span / target;
            let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
            let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
            let mut buckets = vec![Vec::new(); nx * ny];
            for (t, tri) in self.triangles.iter().enumerate() {
                let xs = tri.map(|v| self.vertices[v][0]);
                let ys = tri.map(|v| self.vertices[v][1]);
                let fmin = |a: [f64; 3]| a.iter().copied().fold(f64::INFINITY, f64::min);
                let fmax = |a: [f64; 3]| a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let i0 = ((fmin(xs) - lo[0]) / cell).floor().max(0.0) as usize;
                let i1 = (((fmax(xs) - lo[0]) / cell).floor() as usize).min(nx - 1);
                let j0 = ((fmin(ys) - lo[1]) / cell).floor().max(0.0) as usize;
                let j1 = (((fmax(ys) - lo[1]) / cell).floor() as usize).min(ny - 1);
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        buckets[j * nx + i].push(t);
                    }
                }
            }
            Locator {
                origin: lo,
                cell,
                nx,
                ny,
                buckets,
            }
        })
    }

    /// Barycentric weights of `p` in triangle `t`; exact 1/0 weights at vertices.
    pub fn barycentric(&self, t: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        let d = cross(a, b, c);
        let l1 = cross(a, p, c) / d;
        let l2 = cross(a, b, p) / d;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Containing triangle and barycentric weights of a projected point.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let loc = self.locator();
        let i = ((p[0] - loc.origin[0]) / loc.cell).floor();
        let j = ((p[1] - loc.origin[1]) / loc.cell).floor();
        if i < 0.0 || j < 0.0 || i as usize >= loc.nx || j as usize >= loc.ny {
            return None;
        }
        let bucket = &loc.buckets[j as usize * loc.nx + i as usize];
        let tol = -1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in bucket {
            let w = self.barycentric(t, p);
            let worst = w.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= tol {
                return Some((t, w));
            }
            if worst > -1e-9 && best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, w, worst));
            }
        }
        best.map(|(t, w, _)| (t, w))
    }

    pub fn locate_lonlat(&self, lon: f64, lat: f64) -> Option<(usize, [f64; 3])> {
        self.locate(self.projection.forward(lon, lat))
    }

    pub fn contains_lonlat(&self, lon: f64, lat: f64) -> bool {
        self.locate_lonlat(lon, lat).is_some()
    }

    /// Linear interpolation of per-vertex values at a projected point.
    pub fn interpolate(&self, values: &[f64], p: [f64; 2]) -> Option<f64> {
        self.locate(p).map(|(t, w)| {
            let tri = self.triangles[t];
            (0..3).map(|k| w[k] * values[tri[k]]).sum()
        })
    }

    pub fn to_json_value(&self) -> MeshJson {
        MeshJson {
            projection: self.projection,
            vertices_km: self.vertices.clone(),
            vertices_lonlat: (0..self.n_vertices())
                .map(|v| {
                    let (lon, lat) = self.vertex_lonlat(v);
                    [lon, lat]
                })
                .collect(),
            triangles: self.triangles.clone(),
            boundary: self.boundary.clone(),
            input_vertices: self.input_vertices,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&self.to_json_value()).map_err(|e| Error::Artifact(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MeshJson = serde_json::from_str(text).map_err(|e| Error::Artifact(e.to_string()))?;
        Mesh::from_parts(m.projection, m.vertices_km, m.triangles, m.boundary, m.input_vertices)
    }
}

/// Drop exact duplicates, then greedily merge points within `cutoff` of an earlier kept point.
fn dedupe(points: &[[f64; 2]], cutoff: f64) -> Vec<[f64; 2]> {
    let mut kept: Vec<[f64; 2]> = Vec::new();
    if cutoff <= 0.0 {
        for &p in points {
            if !kept.contains(&p) {
                kept.push(p);
            }
        }
        return kept;
    }
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> = std::collections::HashMap::new();
    let key = |p: [f64; 2]| ((p[0] / cutoff).floor() as i64, (p[1] / cutoff).floor() as i64);
    'outer: for &p in points {
        let (ki, kj) = key(p);
        for di in -1..=1 {
            for dj in -1..=1 {
                if let Some(list) = grid.get(&(ki + di, kj + dj)) {
                    if list.iter().any(|&k| dist(kept[k], p) < cutoff || kept[k] == p) {
                        continue 'outer;
                    }
                }
            }
        }
        grid.entry((ki, kj)).or_default().push(kept.len());
        kept.push(p);
    }
    kept
}

/// Delaunay mesh over the projected locations with a convex outer extension, refined until
/// every triangle meets its edge-length limit and a minimum-angle criterion.
pub fn build_mesh(locations: &[(f64, f64)], params: &MeshParams) -> Result<Mesh> {
    if locations.iter().any(|&(lon, lat)| !lon.is_finite() || !lat.is_finite()) {
        return Err(Error::Mesh("non-finite location".into()));
    }
    for (name, v) in [
        ("max_edge_km", params.max_edge_km),
        ("outer_max_edge_km", params.outer_max_edge_km),
        ("extension_km", params.extension_km),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Mesh(format!("{name} must be positive, got {v}")));
        }
    }
    let projection = GeoProjection::centred_on(locations);
    let projected: Vec<[f64; 2]> = locations.iter().map(|&(lon, lat)| projection.forward(lon, lat)).collect();
    let points = dedupe(&projected, params.cutoff_km);
    let hull = convex_hull(&points);
    if points.len() < 3 || hull.len() < 3 || polygon_area(&hull) <= 1e-9 {
        return Err(Error::Mesh("need at least 3 non-collinear locations".into()));
    }
    let outer = offset_boundary(&hull, params.extension_km, params.outer_max_edge_km);

    let mut tri: DelaunayTriangulation<Point2<f64>> = DelaunayTriangulation::new();
    let insert = |tri: &mut DelaunayTriangulation<Point2<f64>>, p: [f64; 2]| {
        tri.insert(Point2::new(p[0], p[1]))
            .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))
    };
    for &p in points.iter().chain(&outer) {
        insert(&mut tri, p)?;
    }
    if tri.num_vertices() != points.len() + outer.len() {
        return Err(Error::Mesh("boundary vertices coincide with input locations".into()));
    }

    let limit = |c: [f64; 2]| {
        if in_convex(&hull, c, 0.0) {
            params.max_edge_km
        } else {
            params.outer_max_edge_km
        }
    };
    let max_vertices = 50_000;
    for _round in 0..500 {
        let mut bad: Vec<(f64, [f64; 2], bool)> = Vec::new();
        for face in tri.inner_faces() {
            let pos = face.positions().map(|p| [p.x, p.y]);
            let edges = [dist(pos[1], pos[2]), dist(pos[2], pos[0]), dist(pos[0], pos[1])];
            let longest = edges.iter().copied().fold(0.0, f64::max);
            let centroid = [
                (pos[0][0] + pos[1][0] + pos[2][0]) / 3.0,
                (pos[0][1] + pos[1][1] + pos[2][1]) / 3.0,
            ];
            let lim = limit(centroid);
            let area = 0.5 * cross(pos[0], pos[1], pos[2]).abs();
            let mut sorted = edges;
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            // The smallest angle is opposite the shortest edge.
            let sin_min = 2.0 * area / (sorted[1] * sorted[2]);
            let too_long = longest > lim;
            let skinny = sin_min < 21f64.to_radians().sin() && longest > 0.35 * lim;
            if !(too_long || skinny) {
                continue;
            }
            let cc = face.circumcenter();
            let cc = [cc.x, cc.y];
            if in_convex(&outer, cc, -1e-6 * lim) {
                bad.push((longest / lim, cc, too_long));
            } else if too_long {
                let k = (0..3)
                    .max_by(|&a, &b| edges[a].partial_cmp(&edges[b]).expect("finite"))
                    .expect("three edges");
                let (a, b) = (pos[(k + 1) % 3], pos[(k + 2) % 3]);
                bad.push((longest / lim, [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0], true));
            }
        }
        if bad.is_empty() {
            break;
        }
        bad.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
        let before = tri.num_vertices();
        let mut inserted: Vec<[f64; 2]> = Vec::new();
        for (_, p, required) in bad {
            let spacing = 0.25 * limit(p).min(params.max_edge_km);
            if inserted.iter().any(|&q| dist(p, q) <= spacing) {
                continue;
            }
            let near = tri
                .nearest_neighbor(Point2::new(p[0], p[1]))
                .map(|v| dist([v.position().x, v.position().y], p));
            // Quality insertions never crowd existing vertices; no insertion may duplicate one.
            let clearance = if required { 1e-3 * spacing } else { spacing };
            if near.is_some_and(|d| d <= clearance) {
                continue;
            }
            insert(&mut tri, p)?;
            inserted.push(p);
        }
        if tri.num_vertices() == before {
            break;
        }
        if tri.num_vertices() > max_vertices {
            return Err(Error::Mesh(format!("refinement exceeded {max_vertices} vertices")));
        }
    }

    let vertices: Vec<[f64; 2]> = tri.vertices().map(|v| [v.position().x, v.position().y]).collect();
    // Splitting a hull edge at a rounded midpoint can leave a zero-area sliver against the hull;
    // dropping it keeps the mesh conforming because the midpoint remains a vertex.
    let triangles: Vec<[usize; 3]> = tri
        .inner_faces()
        .filter(|f| {
            let p = f.positions().map(|p| [p.x, p.y]);
            let longest = dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]));
            cross(p[0], p[1], p[2]).abs() > 1e-9 * longest * longest
        })
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    let boundary: Vec<usize> = tri.convex_hull().map(|e| e.from().fix().index()).collect();
    Mesh::from_parts(projection, vertices, triangles, boundary, points.len())
}

/// Sparse observation matrix: barycentric weights of each location in its triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    pub n_cols: usize,
    /// Nonzero `(vertex, weight)` pairs per row.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl ProjectionMatrix {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, w)| w * x[j]).sum())
            .collect()
    }
}

/// Projection rows for projected km points.
pub fn projection_matrix_km(mesh: &Mesh, points: &[[f64; 2]]) -> Result<ProjectionMatrix> {
    let rows = points
        .iter()
        .map(|&p| {
            let (t, w) = mesh
                .locate(p)
                .ok_or_else(|| Error::Mesh(format!("point {p:?} lies outside the mesh")))?;
            let tri = mesh.triangles[t];
            let mut row: Vec<(usize, f64)> = (0..3).filter(|&k| w[k] != 0.0).map(|k| (tri[k], w[k])).collect();
            row.sort_by_key(|e| e.0);
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(ProjectionMatrix {
        n_cols: mesh.n_vertices(),
        rows,
    })
}

/// Projection rows for (lon, lat) locations.
pub fn projection_matrix(mesh: &Mesh, locations: &[(f64, f64)]) -> Result<ProjectionMatrix> {
    let pts: Vec<[f64; 2]> = locations.iter().map(|&(lon, lat)| mesh.projection.forward(lon, lat)).collect();
    projection_matrix_km(mesh, &pts)
}
