//! "Diagonal plus common" factor structure: which coordinates of each `u`
//! and `v` row are solved, copied or held fixed.

use serde::{Deserialize, Serialize};

use crate::curves::TenorGrid;
use crate::error::{Error, Result};

/// How one coordinate of a fitted row is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coord {
    Fixed(f64),
    /// The single coordinate found by the root solve.
    Solve,
    /// Same coordinate of the already fitted fine-grid row `u_l`.
    FromU(usize),
}

/// Recipe for one fitted row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowPlan {
    Coords(Vec<Coord>),
    /// Solve for the scale `s` of `s * direction`.
    Ray(Vec<f64>),
}

impl RowPlan {
    /// Solve one coordinate, keep the others at `base`.
    pub fn solve_at(base: &[f64], coord: usize) -> Self {
        let mut c: Vec<Coord> = base.iter().map(|&b| Coord::Fixed(b)).collect();
        c[coord] = Coord::Solve;
        RowPlan::Coords(c)
    }

    pub fn dim(&self) -> usize {
        match self {
            RowPlan::Coords(c) => c.len(),
            RowPlan::Ray(d) => d.len(),
        }
    }

    /// Rows of `u` referenced by [`Coord::FromU`].
    pub fn dependencies(&self) -> Vec<usize> {
        match self {
            RowPlan::Coords(c) => c
                .iter()
                .filter_map(|c| if let Coord::FromU(l) = c { Some(*l) } else { None })
                .collect(),
            RowPlan::Ray(_) => Vec::new(),
        }
    }
}

/// Per-maturity idiosyncratic factors plus one common factor at coordinate 0.
///
/// Maturity `i` (in years) owns the fine rows `l` in `(l(i-1), l(i)]`,
/// `l(i) = i / fine_step`; row 0 belongs to maturity 1 and rows past the
/// last maturity belong to maturity `M`. In such a row the own coordinate is
/// solved, coordinates of later maturities are frozen at the first row of
/// their block and coordinates of earlier maturities are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorLayout {
    pub maturity_count: usize,
    pub fine_step: f64,
    pub n_fine: usize,
    pub u_common: f64,
    /// Common coordinate of every `v` row, one value per tenor.
    pub v_common: Vec<f64>,
    pub grids: Vec<TenorGrid>,
}

impl FactorLayout {
    pub fn new(
        maturity_count: usize,
        grids: Vec<TenorGrid>,
        u_common: f64,
        v_common: Vec<f64>,
    ) -> Result<Self> {
        let first = grids.first().ok_or_else(|| Error::Layout("no tenor grid".into()))?;
        let fine_step = first.fine_step;
        let terminal = first.terminal();
        if grids
            .iter()
            .any(|g| (g.fine_step - fine_step).abs() > 1e-12 || (g.terminal() - terminal).abs() > 1e-9)
        {
            return Err(Error::Layout("tenor grids do not share the fine grid".into()));
        }
        if v_common.len() != grids.len() {
            return Err(Error::Layout("one common v coordinate per tenor is required".into()));
        }
        let per_year = 1.0 / fine_step;
        if (per_year - per_year.round()).abs() > 1e-9 {
            return Err(Error::Layout("whole years are not on the fine grid".into()));
        }
        let n_fine = (terminal / fine_step).round() as usize;
        if maturity_count == 0 || maturity_count * per_year.round() as usize > n_fine {
            return Err(Error::Layout(format!(
                "{maturity_count} annual maturities do not fit before {terminal}"
            )));
        }
        for g in &grids {
            let r = 1.0 / g.delta;
            if (r - r.round()).abs() > 1e-9 {
                return Err(Error::Layout(format!("accrual {} does not divide a year", g.delta)));
            }
        }
        Ok(Self { maturity_count, fine_step, n_fine, u_common, v_common, grids })
    }

    /// Dimension `M + 1` of the driver.
    pub fn dim(&self) -> usize {
        self.maturity_count + 1
    }

    pub fn common_index(&self) -> usize {
        0
    }

    pub fn idiosyncratic_index(&self, maturity: usize) -> usize {
        maturity
    }

    fn per_year(&self) -> usize {
        (1.0 / self.fine_step).round() as usize
    }

    /// Fine index of maturity year `i`.
    pub fn maturity_row(&self, i: usize) -> usize {
        i * self.per_year()
    }

    /// Maturity whose coordinate is solved in fine row `l`.
    pub fn active_maturity(&self, l: usize) -> usize {
        if l == 0 {
            return 1;
        }
        (l.div_ceil(self.per_year())).min(self.maturity_count)
    }

    /// First fine row of the block owned by maturity `j`.
    pub fn block_start(&self, j: usize) -> usize {
        if j == 1 {
            0
        } else {
            self.maturity_row(j - 1) + 1
        }
    }

    fn row(&self, active: usize, common: Coord) -> RowPlan {
        let mut c = vec![Coord::Fixed(0.0); self.dim()];
        c[0] = common;
        c[active] = Coord::Solve;
        for (j, cj) in c.iter_mut().enumerate().skip(active + 1) {
            *cj = Coord::FromU(self.block_start(j));
        }
        RowPlan::Coords(c)
    }

    /// Plan of the fine row `u_l`; row `N` is identically zero.
    pub fn u_plan(&self, l: usize) -> RowPlan {
        if l >= self.n_fine {
            return RowPlan::Coords(vec![Coord::Fixed(0.0); self.dim()]);
        }
        self.row(self.active_maturity(l), Coord::Fixed(self.u_common))
    }

    /// Plan of `v_k^x` for tenor `x`; the last row is zero.
    pub fn v_plan(&self, x: usize, k: usize) -> RowPlan {
        let g = &self.grids[x];
        if k >= g.n_points {
            return RowPlan::Coords(vec![Coord::Fixed(0.0); self.dim()]);
        }
        let l = g.map_to_fine(k);
        self.row(self.active_maturity(l), Coord::Fixed(self.v_common[x]))
    }

    /// Period index of the caplet on tenor `x` paying at year `i`.
    pub fn caplet_period(&self, x: usize, maturity: usize) -> usize {
        let g = &self.grids[x];
        (maturity as f64 / g.delta).round() as usize
    }
}
