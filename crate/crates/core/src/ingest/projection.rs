//! Forward transverse Mercator projection for the two supported reference
//! systems, using the Redfearn series as published by Ordnance Survey.
//!
//! No datum shift is applied: input longitude/latitude are projected directly
//! on the target ellipsoid. For WGS84 input into the British National Grid this
//! introduces an offset of roughly 100 m, far below the grid cell size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate reference system of a projected grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crs {
    /// British National Grid (Airy 1830 ellipsoid).
    Bng,
    /// UTM zone 17 north (WGS84 ellipsoid).
    Utm17n,
    /// Already-projected local kilometre coordinates (synthetic data).
    Local,
}

impl Crs {
    pub fn tag(self) -> &'static str {
        match self {
            Crs::Bng => "bng",
            Crs::Utm17n => "utm17n",
            Crs::Local => "local",
        }
    }
}

impl std::str::FromStr for Crs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bng" => Ok(Crs::Bng),
            "utm17n" => Ok(Crs::Utm17n),
            "local" => Ok(Crs::Local),
            other => Err(Error::InvalidParameter(format!("unknown crs `{other}`"))),
        }
    }
}

/// Ellipsoid and projection constants for one transverse Mercator system.
#[derive(Debug, Clone, Copy)]
pub struct TransverseMercator {
    pub name: &'static str,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub scale: f64,
    pub lat_origin_deg: f64,
    pub lon_origin_deg: f64,
    pub false_easting: f64,
    pub false_northing: f64,
    /// (min_lon, max_lon, min_lat, max_lat) in degrees.
    pub zone: (f64, f64, f64, f64),
}

pub const BNG: TransverseMercator = TransverseMercator {
    name: "British National Grid",
    semi_major: 6_377_563.396,
    semi_minor: 6_356_256.909,
    scale: 0.999_601_271_7,
    lat_origin_deg: 49.0,
    lon_origin_deg: -2.0,
    false_easting: 400_000.0,
    false_northing: -100_000.0,
    zone: (-9.0, 3.0, 49.0, 61.0),
};

const WGS84_A: f64 = 6_378_137.0;
const WGS84_INV_F: f64 = 298.257_223_563;

pub const UTM17N: TransverseMercator = TransverseMercator {
    name: "UTM zone 17N",
    semi_major: WGS84_A,
    semi_minor: WGS84_A * (1.0 - 1.0 / WGS84_INV_F),
    scale: 0.9996,
    lat_origin_deg: 0.0,
    lon_origin_deg: -81.0,
    false_easting: 500_000.0,
    false_northing: 0.0,
    zone: (-84.0, -78.0, 0.0, 84.0),
};

impl TransverseMercator {
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let (lo0, lo1, la0, la1) = self.zone;
        (lo0..=lo1).contains(&lon) && (la0..=la1).contains(&lat)
    }

    /// Projects to metres without a zone check.
    pub fn forward_m(&self, lon: f64, lat: f64) -> (f64, f64) {
        let a = self.semi_major;
        let b = self.semi_minor;
        let f0 = self.scale;
        let e2 = (a * a - b * b) / (a * a);
        let n = (a - b) / (a + b);
        let (n2, n3) = (n * n, n * n * n);

        let phi = lat.to_radians();
        let phi0 = self.lat_origin_deg.to_radians();
        let dlam = (lon - self.lon_origin_deg).to_radians();

        let (sin_phi, cos_phi) = phi.sin_cos();
        let tan_phi = phi.tan();
        let tan2 = tan_phi * tan_phi;
        let tan4 = tan2 * tan2;

        let den = 1.0 - e2 * sin_phi * sin_phi;
        let nu = a * f0 / den.sqrt();
        let rho = a * f0 * (1.0 - e2) / den.powf(1.5);
        let eta2 = nu / rho - 1.0;

        let dphi = phi - phi0;
        let sphi = phi + phi0;
        let meridional = b
            * f0
            * ((1.0 + n + 1.25 * n2 + 1.25 * n3) * dphi
                - (3.0 * n + 3.0 * n2 + 21.0 / 8.0 * n3) * dphi.sin() * sphi.cos()
                + (15.0 / 8.0 * n2 + 15.0 / 8.0 * n3) * (2.0 * dphi).sin() * (2.0 * sphi).cos()
                - 35.0 / 24.0 * n3 * (3.0 * dphi).sin() * (3.0 * sphi).cos());

        let cos3 = cos_phi.powi(3);
        let cos5 = cos_phi.powi(5);
        let i = meridional + self.false_northing;
        let ii = nu / 2.0 * sin_phi * cos_phi;
        let iii = nu / 24.0 * sin_phi * cos3 * (5.0 - tan2 + 9.0 * eta2);
        let iiia = nu / 720.0 * sin_phi * cos5 * (61.0 - 58.0 * tan2 + tan4);
        let iv = nu * cos_phi;
        let v = nu / 6.0 * cos3 * (nu / rho - tan2);
        let vi = nu / 120.0 * cos5 * (5.0 - 18.0 * tan2 + tan4 + 14.0 * eta2 - 58.0 * tan2 * eta2);

        let l2 = dlam * dlam;
        let northing = i + ii * l2 + iii * l2 * l2 + iiia * l2 * l2 * l2;
        let easting = self.false_easting + iv * dlam + v * l2 * dlam + vi * l2 * l2 * dlam;
        (easting, northing)
    }
}

/// Projects WGS-style longitude/latitude into kilometres on the given CRS.
pub fn project_coords(lon: f64, lat: f64, crs: Crs) -> Result<(f64, f64)> {
    let tm = match crs {
        Crs::Bng => &BNG,
        Crs::Utm17n => &UTM17N,
        Crs::Local => return Ok((lon, lat)),
    };
    if !lon.is_finite() || !lat.is_finite() || !tm.contains(lon, lat) {
        return Err(Error::OutsideZone {
            zone: tm.name,
            lon,
            lat,
        });
    }
    let (e, n) = tm.forward_m(lon, lat);
    Ok((e / 1000.0, n / 1000.0))
}
