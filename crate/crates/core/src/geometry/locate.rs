use super::Mesh2D;

/// Uniform-grid point locator over a mesh.
///
/// `locate` returns the containing triangle and barycentric coordinates;
/// points marginally outside the mesh (e.g. rotated boundary nodes falling
/// off a boundary chord) are clamped to the closest triangle found.
pub struct PointLocator<'a> {
    mesh: &'a Mesh2D,
    min: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    bins: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh2D) -> Self {
        let (mut min, mut max) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &mesh.vertices {
            for d in 0..2 {
                min[d] = min[d].min(v[d]);
                max[d] = max[d].max(v[d]);
            }
        }
        let n_t = mesh.triangles.len().max(1);
        let span = (max[0] - min[0]).max(max[1] - min[1]).max(1e-12);
        let grid = ((n_t as f64).sqrt().ceil() as usize).clamp(1, 512);
        let cell = span / grid as f64;
        let nx = (((max[0] - min[0]) / cell).ceil() as usize + 1).max(1);
        let ny = (((max[1] - min[1]) / cell).ceil() as usize + 1).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let xs = tri.iter().map(|&v| mesh.vertices[v][0]);
            let ys = tri.iter().map(|&v| mesh.vertices[v][1]);
            let (x0, x1) = min_max(xs);
            let (y0, y1) = min_max(ys);
            let i0 = (((x0 - min[0]) / cell).floor() as isize).clamp(0, nx as isize - 1) as usize;
            let i1 = (((x1 - min[0]) / cell).floor() as isize).clamp(0, nx as isize - 1) as usize;
            let j0 = (((y0 - min[1]) / cell).floor() as isize).clamp(0, ny as isize - 1) as usize;
            let j1 = (((y1 - min[1]) / cell).floor() as isize).clamp(0, ny as isize - 1) as usize;
            for i in i0..=i1 {
                for j in j0..=j1 {
                    bins[j * nx + i].push(t);
                }
            }
        }
        Self {
            mesh,
            min,
            cell,
            nx,
            ny,
            bins,
        }
    }

    /// Containing triangle and barycentric coordinates of `p`.
    ///
    /// Falls back to the nearest candidate triangle with clamped barycentric
    /// coordinates when `p` lies outside all triangles.
    pub fn locate(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        let i = (((p[0] - self.min[0]) / self.cell).floor() as isize)
            .clamp(0, self.nx as isize - 1) as usize;
        let j = (((p[1] - self.min[1]) / self.cell).floor() as isize)
            .clamp(0, self.ny as isize - 1) as usize;

        let mut best: Option<(usize, [f64; 3], f64)> = None;
        // search the point's cell first, then grow the neighborhood
        for ring in 0..=2usize {
            for dj in -(ring as isize)..=(ring as isize) {
                for di in -(ring as isize)..=(ring as isize) {
                    if di.unsigned_abs().max(dj.unsigned_abs()) != ring {
                        continue;
                    }
                    let (ci, cj) = (i as isize + di, j as isize + dj);
                    if ci < 0 || cj < 0 || ci >= self.nx as isize || cj >= self.ny as isize {
                        continue;
                    }
                    for &t in &self.bins[cj as usize * self.nx + ci as usize] {
                        let b = self.mesh.barycentric(t, p);
                        let worst = b[0].min(b[1]).min(b[2]);
                        if worst >= -1e-10 {
                            return (t, clamp_barycentric(b));
                        }
                        if best.map_or(true, |(_, _, w)| worst > w) {
                            best = Some((t, b, worst));
                        }
                    }
                }
            }
            if let Some((t, b, w)) = best {
                if ring >= 1 && w > -1e-6 {
                    return (t, clamp_barycentric(b));
                }
            }
        }
        match best {
            Some((t, b, _)) => (t, clamp_barycentric(b)),
            None => self.brute_force(p),
        }
    }

    fn brute_force(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        let mut best = (0usize, [1.0, 0.0, 0.0], f64::NEG_INFINITY);
        for t in 0..self.mesh.triangles.len() {
            let b = self.mesh.barycentric(t, p);
            let worst = b[0].min(b[1]).min(b[2]);
            if worst > best.2 {
                best = (t, b, worst);
            }
        }
        (best.0, clamp_barycentric(best.1))
    }
}

fn clamp_barycentric(b: [f64; 3]) -> [f64; 3] {
    let c = [b[0].max(0.0), b[1].max(0.0), b[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

fn min_max(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_disk_mesh, ElectrodeLayout};

    #[test]
    fn locates_interior_points_exactly() {
        let layout = ElectrodeLayout::new(8, 1.5, 10.0, 0.0).unwrap();
        let mesh = generate_disk_mesh(&layout, 400).unwrap();
        let loc = PointLocator::new(&mesh);
        for &p in &[[0.0, 0.0], [3.3, -2.1], [-6.0, 6.0], [9.0, 0.5]] {
            let (t, b) = loc.locate(p);
            let [v0, v1, v2] = mesh.triangles[t];
            let x = b[0] * mesh.vertices[v0][0] + b[1] * mesh.vertices[v1][0]
                + b[2] * mesh.vertices[v2][0];
            let y = b[0] * mesh.vertices[v0][1] + b[1] * mesh.vertices[v1][1]
                + b[2] * mesh.vertices[v2][1];
            assert!((x - p[0]).abs() < 1e-9 && (y - p[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn clamps_points_marginally_outside() {
        let layout = ElectrodeLayout::new(8, 1.5, 10.0, 0.0).unwrap();
        let mesh = generate_disk_mesh(&layout, 400).unwrap();
        let loc = PointLocator::new(&mesh);
        let (_, b) = loc.locate([10.0 + 1e-6, 0.0]);
        assert!(b.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let s: f64 = b.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
