//! Rectangular region of interest, its g×g partition into cells, and
//! great-circle distance.
//!
//! Rows run south to north and columns west to east, so `CellId { row: 0, col: 0 }`
//! is the south-west corner cell. Cells are equal in degree space.

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Mean Earth radius (IUGG), in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::Validation(format!(
                "coordinates ({}, {}) out of range",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBounds {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl GeoBounds {
    pub fn new(south: f64, west: f64, north: f64, east: f64) -> Result<Self> {
        let b = GeoBounds {
            south,
            west,
            north,
            east,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        GeoPoint {
            lat: self.south,
            lon: self.west,
        }
        .validate()?;
        GeoPoint {
            lat: self.north,
            lon: self.east,
        }
        .validate()?;
        if self.south >= self.north || self.west >= self.east {
            return Err(GeoError::Validation(format!(
                "bounds need south < north and west < east, got {}",
                self
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.south..=self.north).contains(&p.lat) && (self.west..=self.east).contains(&p.lon)
    }

    pub fn centroid(&self) -> GeoPoint {
        GeoPoint {
            lat: (self.south + self.north) / 2.0,
            lon: (self.west + self.east) / 2.0,
        }
    }
}

impl std::fmt::Display for GeoBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.south, self.west, self.north, self.east)
    }
}

impl std::str::FromStr for GeoBounds {
    type Err = GeoError;

    /// Parses `south,west,north,east` in degrees.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| GeoError::Validation(format!("bounds {s:?}: {e}")))?;
        match parts[..] {
            [south, west, north, east] => GeoBounds::new(south, west, north, east),
            _ => Err(GeoError::Validation(format!(
                "bounds {s:?}: expected south,west,north,east"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub row: usize,
    pub col: usize,
}

impl CellId {
    pub const fn new(row: usize, col: usize) -> Self {
        CellId { row, col }
    }

    pub fn chebyshev(self, other: CellId) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

/// Latitude/longitude rectangle covered by one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellRect {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
}

impl CellRect {
    /// Half-open containment, except that `closed_north`/`closed_east` include the
    /// upper edge (used for the last row/column of a partition).
    pub fn contains(&self, p: GeoPoint, closed_north: bool, closed_east: bool) -> bool {
        let lat_ok = p.lat >= self.south && (p.lat < self.north || (closed_north && p.lat <= self.north));
        let lon_ok = p.lon >= self.west && (p.lon < self.east || (closed_east && p.lon <= self.east));
        lat_ok && lon_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPartition {
    bounds: GeoBounds,
    g: usize,
}

impl GridPartition {
    pub fn new(bounds: GeoBounds, g: usize) -> Result<Self> {
        bounds.validate()?;
        if g == 0 {
            return Err(GeoError::Validation("grid dimension must be at least 1".into()));
        }
        Ok(GridPartition { bounds, g })
    }

    pub fn bounds(&self) -> GeoBounds {
        self.bounds
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn cell_count(&self) -> usize {
        self.g * self.g
    }

    /// Row-major position of a cell, `row * g + col`.
    pub fn index_of(&self, c: CellId) -> usize {
        c.row * self.g + c.col
    }

    pub fn cell_at(&self, index: usize) -> CellId {
        CellId::new(index / self.g, index % self.g)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.cell_count()).map(move |i| self.cell_at(i))
    }

    pub fn check_cell(&self, c: CellId) -> Result<()> {
        if c.row < self.g && c.col < self.g {
            Ok(())
        } else {
            Err(GeoError::InvalidCell { cell: c, g: self.g })
        }
    }

    fn lat_edge(&self, i: usize) -> f64 {
        if i == self.g {
            return self.bounds.north;
        }
        self.bounds.south + (self.bounds.north - self.bounds.south) * i as f64 / self.g as f64
    }

    fn lon_edge(&self, i: usize) -> f64 {
        if i == self.g {
            return self.bounds.east;
        }
        self.bounds.west + (self.bounds.east - self.bounds.west) * i as f64 / self.g as f64
    }

    pub fn rect_of(&self, c: CellId) -> Result<CellRect> {
        self.check_cell(c)?;
        Ok(CellRect {
            south: self.lat_edge(c.row),
            west: self.lon_edge(c.col),
            north: self.lat_edge(c.row + 1),
            east: self.lon_edge(c.col + 1),
        })
    }

    /// Locates `value` among the edges produced by `edge`. The first guess comes from
    /// division; the loops correct it against the exact edge values so that the
    /// answer always agrees with `rect_of`.
    fn band(&self, value: f64, lo: f64, hi: f64, edge: impl Fn(usize) -> f64) -> usize {
        let guess = ((value - lo) / (hi - lo) * self.g as f64).floor();
        let mut i = if guess.is_finite() && guess > 0.0 {
            (guess as usize).min(self.g - 1)
        } else {
            0
        };
        while i > 0 && value < edge(i) {
            i -= 1;
        }
        while i + 1 < self.g && value >= edge(i + 1) {
            i += 1;
        }
        i
    }

    /// The unique cell covering `p`. Points on an interior cell edge belong to the
    /// cell with the higher index; the outer north and east edges belong to the
    /// last row and column.
    pub fn cell_of(&self, p: GeoPoint) -> Result<CellId> {
        if !self.bounds.contains(p) {
            return Err(GeoError::OutOfRegion(p));
        }
        let b = self.bounds;
        let row = self.band(p.lat, b.south, b.north, |i| self.lat_edge(i));
        let col = self.band(p.lon, b.west, b.east, |i| self.lon_edge(i));
        Ok(CellId::new(row, col))
    }

    pub fn center_of(&self, c: CellId) -> Result<GeoPoint> {
        let r = self.rect_of(c)?;
        Ok(GeoPoint {
            lat: (r.south + r.north) / 2.0,
            lon: (r.west + r.east) / 2.0,
        })
    }

    /// In-grid cells at Chebyshev distance exactly `k` from `c`, row-major.
    pub fn ring_neighbors(&self, c: CellId, k: usize) -> Result<Vec<CellId>> {
        self.check_cell(c)?;
        if k == 0 {
            return Err(GeoError::Validation("ring distance must be at least 1".into()));
        }
        let g = self.g as isize;
        let (r0, c0, k) = (c.row as isize, c.col as isize, k as isize);
        let mut out = Vec::new();
        for r in (r0 - k).max(0)..=(r0 + k).min(g - 1) {
            let on_edge_row = (r - r0).abs() == k;
            if on_edge_row {
                for col in (c0 - k).max(0)..=(c0 + k).min(g - 1) {
                    out.push(CellId::new(r as usize, col as usize));
                }
            } else {
                for col in [c0 - k, c0 + k] {
                    if (0..g).contains(&col) {
                        out.push(CellId::new(r as usize, col as usize));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Area of one cell in km², using the spherical-rectangle formula.
    pub fn cell_area_km2(&self) -> f64 {
        bounds_area_km2(&self.bounds) / self.cell_count() as f64
    }

    /// Length of the diagonal of the cell, corner to corner, in km.
    pub fn cell_diagonal_km(&self, c: CellId) -> Result<f64> {
        let r = self.rect_of(c)?;
        Ok(geo_distance_km(
            GeoPoint {
                lat: r.south,
                lon: r.west,
            },
            GeoPoint {
                lat: r.north,
                lon: r.east,
            },
        ))
    }
}

pub fn bounds_area_km2(b: &GeoBounds) -> f64 {
    let dlon = (b.east - b.west).to_radians();
    EARTH_RADIUS_KM * EARTH_RADIUS_KM * dlon * (b.north.to_radians().sin() - b.south.to_radians().sin())
}

/// Haversine great-circle distance in kilometres.
pub fn geo_distance_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}
