use nalgebra::Vector3;

pub type Vec3 = Vector3<f64>;

/// Quadratic B-spline weights of a particle over its 3x3x3 node stencil.
#[derive(Clone, Copy, Debug)]
pub struct Stencil {
    pub base: [usize; 3],
    /// Particle position relative to `base`, in cell units.
    pub fx: Vec3,
    pub w: [[f64; 3]; 3],
}

impl Stencil {
    /// `None` when the stencil would leave a grid of `res` nodes per axis.
    #[inline]
    pub fn new(x: &Vec3, inv_dx: f64, res: usize) -> Option<Stencil> {
        let mut base = [0usize; 3];
        let mut fx = Vec3::zeros();
        let mut w = [[0.0; 3]; 3];
        for a in 0..3 {
            let xg = x[a] * inv_dx;
            let b = (xg - 0.5).floor();
            if !(b >= 0.0) || b as usize + 2 >= res {
                return None;
            }
            base[a] = b as usize;
            let f = xg - b;
            fx[a] = f;
            w[a] = [
                0.5 * (1.5 - f) * (1.5 - f),
                0.75 - (f - 1.0) * (f - 1.0),
                0.5 * (f - 0.5) * (f - 0.5),
            ];
        }
        Some(Stencil { base, fx, w })
    }

    /// Visits the 27 nodes as `(offset, weight, dpos_in_cells)`.
    #[inline]
    pub fn for_each(&self, mut f: impl FnMut([usize; 3], f64, Vec3)) {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let weight = self.w[0][i] * self.w[1][j] * self.w[2][k];
                    let dpos = Vec3::new(i as f64, j as f64, k as f64) - self.fx;
                    f([i, j, k], weight, dpos);
                }
            }
        }
    }
}

/// Dense background grid with a list of the nodes touched this step.
#[derive(Clone, Debug)]
pub struct GridField {
    pub resolution: usize,
    pub dx: f64,
    pub mass: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub velocity: Vec<Vec3>,
    /// Node ids that received any particle contribution, in first-touch order.
    pub active: Vec<usize>,
    touched: Vec<bool>,
}

impl GridField {
    pub fn new(resolution: usize, dx: f64) -> Self {
        let n = resolution * resolution * resolution;
        GridField {
            resolution,
            dx,
            mass: vec![0.0; n],
            momentum: vec![Vec3::zeros(); n],
            velocity: vec![Vec3::zeros(); n],
            active: Vec::new(),
            touched: vec![false; n],
        }
    }

    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.resolution + ijk[1]) * self.resolution + ijk[2]
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let r = self.resolution;
        [index / (r * r), (index / r) % r, index % r]
    }

    pub fn node_position(&self, index: usize) -> Vec3 {
        let c = self.coords(index);
        Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.dx
    }

    /// Zeroes the nodes touched in the previous step.
    pub fn clear(&mut self) {
        for &i in &self.active {
            self.mass[i] = 0.0;
            self.momentum[i] = Vec3::zeros();
            self.velocity[i] = Vec3::zeros();
            self.touched[i] = false;
        }
        self.active.clear();
    }

    #[inline]
    pub fn scatter(&mut self, index: usize, mass: f64, momentum: Vec3) {
        if !self.touched[index] {
            self.touched[index] = true;
            self.active.push(index);
        }
        self.mass[index] += mass;
        self.momentum[index] += momentum;
    }

    pub fn total_mass(&self) -> f64 {
        self.active.iter().map(|&i| self.mass[i]).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.active.iter().map(|&i| self.momentum[i]).sum()
    }
}
