use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use super::AxisBox;
use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Exact rational for a decimal-looking float (`0.7 -> 7/10`).
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Ratio::approximate_float(x)
        .ok_or_else(|| Error::Dimension(format!("{x} has no rational approximation")))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// One axis of a lattice anchored at the domain's lower bound. Cell `k` is
/// `(lower + k w, lower + (k + 1) w]` intersected with the domain; cell 0 is
/// closed at the lower bound so no degenerate boundary cell appears.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridAxis {
    pub lower: Rational,
    pub upper: Rational,
    pub width: Rational,
    pub count: usize,
}

impl GridAxis {
    pub fn new(lower: Rational, upper: Rational, width: Rational) -> Result<Self> {
        if width <= Rational::zero() {
            return Err(Error::Dimension(format!("grid width {width} must be positive")));
        }
        if upper < lower {
            return Err(Error::Dimension(format!("empty axis [{lower}, {upper}]")));
        }
        let span = (upper - lower) / width;
        let count = span.ceil().to_integer().max(1);
        Ok(Self {
            lower,
            upper,
            width,
            count: count as usize,
        })
    }

    pub fn bound(&self, k: usize) -> f64 {
        let b = self.lower + self.width * Rational::from_integer(k as i64);
        rational_to_f64(&b.min(self.upper))
    }

    pub fn lower_f64(&self) -> f64 {
        rational_to_f64(&self.lower)
    }

    pub fn upper_f64(&self) -> f64 {
        rational_to_f64(&self.upper)
    }

    pub fn width_f64(&self) -> f64 {
        rational_to_f64(&self.width)
    }

    /// Half-open membership with the closed first cell.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.lower_f64() && x <= self.upper_f64()) {
            return None;
        }
        let guess = ((x - self.lower_f64()) / self.width_f64()).floor();
        let mut k = (guess.max(0.0) as usize).min(self.count - 1);
        while k > 0 && x <= self.bound(k) {
            k -= 1;
        }
        while k + 1 < self.count && x > self.bound(k + 1) {
            k += 1;
        }
        Some(k)
    }

    /// Indices of cells whose closures meet `[lo, hi]`.
    pub fn overlapping(&self, lo: f64, hi: f64, tol: f64) -> std::ops::Range<usize> {
        let w = self.width_f64();
        let start = (((lo - self.lower_f64()) / w).floor() - 1.0).max(0.0) as usize;
        let end = ((((hi - self.lower_f64()) / w).ceil() + 1.0).max(0.0) as usize).min(self.count);
        let mut first = start.min(self.count);
        while first < end && self.bound(first + 1) < lo - tol {
            first += 1;
        }
        let mut last = end;
        while last > first && self.bound(last - 1) > hi + tol {
            last -= 1;
        }
        first..last
    }
}

/// A uniform product grid over a box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    pub axes: Vec<GridAxis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub index: Vec<usize>,
    pub cell: AxisBox,
}

impl Lattice {
    pub fn new(domain: &AxisBox, widths: &[Rational]) -> Result<Self> {
        if widths.len() != domain.dim() {
            return Err(Error::Dimension(format!(
                "{} grid widths for a {}-dimensional domain",
                widths.len(),
                domain.dim()
            )));
        }
        let axes = (0..domain.dim())
            .map(|i| {
                GridAxis::new(
                    rational_from_f64(domain.lower[i])?,
                    rational_from_f64(domain.upper[i])?,
                    widths[i],
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { axes })
    }

    /// Grid with `counts[i]` equal cells along axis `i`.
    pub fn with_counts(domain: &AxisBox, counts: &[usize]) -> Result<Self> {
        if counts.len() != domain.dim() || counts.contains(&0) {
            return Err(Error::Dimension(format!("invalid cell counts {counts:?}")));
        }
        let widths = (0..domain.dim())
            .map(|i| {
                let span = rational_from_f64(domain.upper[i])? - rational_from_f64(domain.lower[i])?;
                Ok(span / Rational::from_integer(counts[i] as i64))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(domain, &widths)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn widths(&self) -> Vec<Rational> {
        self.axes.iter().map(|a| a.width).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same lattice with every width halved.
    pub fn halved(&self) -> Self {
        let two = Rational::from_integer(2);
        let axes = self
            .axes
            .iter()
            .map(|a| GridAxis::new(a.lower, a.upper, a.width / two).expect("halving keeps width positive"))
            .collect();
        Self { axes }
    }

    /// Row-major flat index, last axis fastest.
    pub fn flat(&self, index: &[usize]) -> usize {
        self.axes
            .iter()
            .zip(index)
            .fold(0, |acc, (axis, k)| acc * axis.count + k)
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        let mut index = vec![0; self.dim()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            index[i] = flat % axis.count;
            flat /= axis.count;
        }
        index
    }

    pub fn cell(&self, index: &[usize]) -> AxisBox {
        let lower = self.axes.iter().zip(index).map(|(a, &k)| a.bound(k)).collect();
        let upper = self.axes.iter().zip(index).map(|(a, &k)| a.bound(k + 1)).collect();
        let open = index.iter().map(|&k| k > 0).collect();
        AxisBox::half_open(lower, upper, open)
    }

    pub fn locate(&self, x: &[f64]) -> Option<Vec<usize>> {
        if x.len() != self.dim() {
            return None;
        }
        self.axes.iter().zip(x).map(|(a, &v)| a.locate(v)).collect()
    }

    /// Flat indices of all cells whose closures meet the closed box `region`.
    pub fn overlapping(&self, region: &AxisBox, tol: f64) -> Vec<usize> {
        let ranges: Vec<_> = self
            .axes
            .iter()
            .enumerate()
            .map(|(i, a)| a.overlapping(region.lower[i], region.upper[i], tol))
            .collect();
        if ranges.iter().any(|r| r.is_empty()) {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut index: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        loop {
            out.push(self.flat(&index));
            let mut axis = self.dim();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                index[axis] += 1;
                if index[axis] < ranges[axis].end {
                    break;
                }
                index[axis] = ranges[axis].start;
            }
        }
    }

    /// Number of fine cells per coarse cell along each axis, if `self` nests
    /// inside `coarse`.
    pub fn nesting_ratio(&self, coarse: &Lattice) -> Result<Vec<usize>> {
        if self.dim() != coarse.dim() {
            return Err(Error::NonNestedGrids("dimensions differ".into()));
        }
        self.axes
            .iter()
            .zip(&coarse.axes)
            .map(|(fine, coarse)| {
                if fine.lower != coarse.lower || fine.upper != coarse.upper {
                    return Err(Error::NonNestedGrids("domains differ".into()));
                }
                let ratio = coarse.width / fine.width;
                if !ratio.is_integer() || ratio < Rational::from_integer(1) {
                    return Err(Error::NonNestedGrids(format!(
                        "width {} does not divide {}",
                        fine.width, coarse.width
                    )));
                }
                Ok(ratio.to_integer() as usize)
            })
            .collect()
    }
}

/// All cells of the grid partition of `domain` with per-axis widths.
pub fn grid(domain: &AxisBox, widths: &[Rational]) -> Result<Vec<GridCell>> {
    let lattice = Lattice::new(domain, widths)?;
    Ok((0..lattice.len())
        .map(|f| {
            let index = lattice.unflat(f);
            let cell = lattice.cell(&index);
            GridCell { index, cell }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn unit_square_at_half() {
        let dom = AxisBox::closed(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(grid(&dom, &[r(1, 2), r(1, 2)]).unwrap().len(), 4);
    }

    #[test]
    fn symmetric_interval_into_five() {
        let dom = AxisBox::closed(vec![-1.0], vec![1.0]);
        let cells = grid(&dom, &[r(2, 5)]).unwrap();
        assert_eq!(cells.len(), 5);
        assert_eq!(cells[0].cell.lower, vec![-1.0]);
        assert!(!cells[0].cell.is_lower_open(0));
        assert_eq!(cells[2].cell.lower, vec![-0.2]);
        assert_eq!(cells[2].cell.upper, vec![0.2]);
        assert!(cells[2].cell.contains(&[0.0]));
    }

    #[test]
    fn two_tank_grid_shape() {
        let dom = AxisBox::closed(vec![0.0, 0.0], vec![0.7, 0.7]);
        let cells = grid(&dom, &[r(1, 40), r(7, 160)]).unwrap();
        assert_eq!(cells.len(), 28 * 16);
        let lat = Lattice::new(&dom, &[r(1, 40), r(7, 160)]).unwrap();
        assert_eq!(lat.counts(), vec![28, 16]);
    }

    #[test]
    fn partial_last_cell_is_truncated() {
        let dom = AxisBox::closed(vec![0.0], vec![1.0]);
        let lat = Lattice::new(&dom, &[r(3, 10)]).unwrap();
        assert_eq!(lat.len(), 4);
        assert_eq!(lat.cell(&[3]).upper, vec![1.0]);
    }

    #[test]
    fn boundary_points_follow_half_open_rule() {
        let dom = AxisBox::closed(vec![-1.0], vec![1.0]);
        let lat = Lattice::new(&dom, &[r(1, 10)]).unwrap();
        assert_eq!(lat.locate(&[-1.0]), Some(vec![0]));
        assert_eq!(lat.locate(&[-0.9]), Some(vec![0]));
        assert_eq!(lat.locate(&[0.2]), Some(vec![11]));
        assert_eq!(lat.locate(&[1.0]), Some(vec![19]));
        assert_eq!(lat.locate(&[1.0000001]), None);
    }

    #[test]
    fn flat_index_round_trip() {
        let dom = AxisBox::closed(vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]);
        let lat = Lattice::new(&dom, &[r(1, 2), r(1, 2), r(1, 2)]).unwrap();
        for f in 0..lat.len() {
            assert_eq!(lat.flat(&lat.unflat(f)), f);
        }
    }

    #[test]
    fn overlapping_cells_of_region() {
        let dom = AxisBox::closed(vec![0.0], vec![1.0]);
        let lat = Lattice::new(&dom, &[r(1, 4)]).unwrap();
        let hit = lat.overlapping(&AxisBox::closed(vec![0.3], vec![0.5]), 0.0);
        assert_eq!(hit, vec![1, 2]);
        let touch = lat.overlapping(&AxisBox::closed(vec![0.5], vec![0.5]), 0.0);
        assert_eq!(touch, vec![1, 2]);
    }

    #[test]
    fn nesting_ratio_requires_divisibility() {
        let dom = AxisBox::closed(vec![0.0], vec![1.0]);
        let coarse = Lattice::new(&dom, &[r(1, 2)]).unwrap();
        let fine = coarse.halved().halved();
        assert_eq!(fine.nesting_ratio(&coarse).unwrap(), vec![4]);
        let odd = Lattice::new(&dom, &[r(1, 3)]).unwrap();
        assert!(odd.nesting_ratio(&coarse).is_err());
    }
}
