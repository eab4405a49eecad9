//! Sampling of constraint surfaces and iso-curve families, the isoprice
//! degeneracy check, and CSV/JSON export.
//!
//! Grids are linearly spaced and emitted row-major with `t` outer and `x`
//! inner. Rows may be evaluated in parallel; the output is identical to a
//! sequential evaluation.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{supply_quantity, Demand, Price};
use crate::eos::per_household;
use crate::equilibrium::{Interpretation, MarketSpec};
use crate::error::{Error, Result};
use crate::reference_eos::{AxisLabels, ConstraintSurface};

/// Relative residual bound every emitted surface point must meet.
pub const SURFACE_TOLERANCE: f64 = 1e-9;

/// Relative deviation below which iso-curves are considered one curve.
pub const COLLAPSE_TOLERANCE: f64 = 1e-12;

fn relative(diff: f64, scale: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff.abs() / scale.abs().max(f64::MIN_POSITIVE)
    }
}

/// Linearly spaced values; the last one is exactly `max`.
fn linspace(min: f64, max: f64, n: usize) -> impl Iterator<Item = f64> {
    let span = max - min;
    let last = n - 1;
    (0..n).map(move |i| {
        if i == last {
            max
        } else {
            min + span * (i as f64) / (last as f64)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec")]
pub struct GridSpec {
    x_min: f64,
    x_max: f64,
    nx: usize,
    t_min: f64,
    t_max: f64,
    nt: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGridSpec {
    x_min: f64,
    x_max: f64,
    nx: usize,
    t_min: f64,
    t_max: f64,
    nt: usize,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = Error;

    fn try_from(r: RawGridSpec) -> Result<Self> {
        GridSpec::new((r.x_min, r.x_max), r.nx, (r.t_min, r.t_max), r.nt)
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invariant(format!(
            "{name} range must satisfy min < max, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl GridSpec {
    pub fn new(x_range: (f64, f64), nx: usize, t_range: (f64, f64), nt: usize) -> Result<Self> {
        check_range("x", x_range)?;
        check_range("t", t_range)?;
        if nx < 2 || nt < 2 {
            return Err(Error::invariant(format!(
                "grid needs at least 2 points per axis, got nx={nx}, nt={nt}"
            )));
        }
        Ok(GridSpec {
            x_min: x_range.0,
            x_max: x_range.1,
            nx,
            t_min: t_range.0,
            t_max: t_range.1,
            nt,
        })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t_min, self.t_max)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn x_values(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx).collect()
    }

    pub fn t_values(&self) -> Vec<f64> {
        linspace(self.t_min, self.t_max, self.nt).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub t: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceGrid {
    pub axes: AxisLabels,
    pub points: Vec<GridPoint>,
}

fn at_point(e: Error, x: f64, t: f64) -> Error {
    match e {
        Error::Domain(msg) => Error::Domain(format!("at grid point (x={x}, t={t}): {msg}")),
        other => other,
    }
}

fn check_on_surface<E: ConstraintSurface + ?Sized>(eos: &E, p: &GridPoint) -> Result<()> {
    let r = eos.residual(p.x, p.y, p.t).map_err(|e| at_point(e, p.x, p.t))?;
    let rel = relative(r, p.y);
    if rel > SURFACE_TOLERANCE {
        return Err(Error::Domain(format!(
            "point (x={}, t={}, y={}) misses the surface: relative residual {rel}",
            p.x, p.t, p.y
        )));
    }
    Ok(())
}

fn sample_row<E>(eos: &E, xs: &[f64], t: f64) -> Result<Vec<GridPoint>>
where
    E: ConstraintSurface + ?Sized,
{
    xs.iter()
        .map(|&x| {
            let y = eos.solve_y(x, t).map_err(|e| at_point(e, x, t))?;
            let p = GridPoint { x, t, y };
            check_on_surface(eos, &p)?;
            Ok(p)
        })
        .collect()
}

/// Samples `Y(X, T)` over `grid`; every point is residual-checked.
pub fn sample_surface<E>(eos: &E, grid: &GridSpec) -> Result<SurfaceGrid>
where
    E: ConstraintSurface + Sync + ?Sized,
{
    let xs = grid.x_values();
    let rows = grid
        .t_values()
        .into_par_iter()
        .map(|t| sample_row(eos, &xs, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceGrid {
        axes: eos.axes(),
        points: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualAudit {
    pub points: usize,
    pub max_relative_residual: f64,
    pub pass: bool,
}

/// Re-evaluates the residual at every grid point.
pub fn audit_surface<E>(eos: &E, grid: &SurfaceGrid) -> Result<ResidualAudit>
where
    E: ConstraintSurface + ?Sized,
{
    let mut max_rel = 0.0f64;
    for p in &grid.points {
        let r = eos.residual(p.x, p.y, p.t).map_err(|e| at_point(e, p.x, p.t))?;
        max_rel = max_rel.max(relative(r, p.y));
    }
    Ok(ResidualAudit {
        points: grid.points.len(),
        max_relative_residual: max_rel,
        pass: max_rel <= SURFACE_TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsocurveFamily {
    pub axes: AxisLabels,
    pub t_values: Vec<f64>,
    pub curves: Vec<Vec<CurvePoint>>,
}

/// One curve `Y(X)` per fixed `T`.
pub fn isocurves<E>(
    eos: &E,
    t_values: &[f64],
    x_range: (f64, f64),
    n_points: usize,
) -> Result<IsocurveFamily>
where
    E: ConstraintSurface + Sync + ?Sized,
{
    if t_values.is_empty() {
        return Err(Error::domain("at least one t value is required"));
    }
    if n_points < 2 {
        return Err(Error::invariant(format!("n_points must be at least 2, got {n_points}")));
    }
    check_range("x", x_range)?;
    let xs: Vec<f64> = linspace(x_range.0, x_range.1, n_points).collect();
    let curves = t_values
        .par_iter()
        .map(|&t| {
            Ok(sample_row(eos, &xs, t)?
                .into_iter()
                .map(|p| CurvePoint { x: p.x, y: p.y })
                .collect())
        })
        .collect::<Result<Vec<Vec<CurvePoint>>>>()?;
    Ok(IsocurveFamily {
        axes: eos.axes(),
        t_values: t_values.to_vec(),
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseReport {
    pub collapse: bool,
    /// Largest relative deviation from the reference line or curve.
    pub max_deviation: f64,
    /// Slope `1/N` of the equilibrium line, for market checks.
    pub line_slope: Option<f64>,
    pub households: Option<u64>,
    pub points: Vec<GridPoint>,
}

/// Checks that cleared market states at every price fall on `q^d = Q^s/N`.
///
/// At each price the supply `Q^s` clears against demand (`Q^d = Q^s`) and
/// the per-household demand is `Q^d/N`. Unlike gas isotherms, the states for
/// different prices all lie on one line.
pub fn isoprice_collapse_check(market: &MarketSpec, prices: &[f64]) -> Result<CollapseReport> {
    if !matches!(market.demand(), Demand::Unitary(_)) {
        return Err(Error::WrongFamily(
            "isoprice collapse check needs a unitary-demand market".into(),
        ));
    }
    let n = market.households();
    if market.interpretation() == Interpretation::Aggregate && n > 1 {
        return Err(Error::invariant(
            "isoprice collapse check requires the per-household interpretation when N > 1",
        ));
    }
    if prices.is_empty() {
        return Err(Error::domain("at least one price is required"));
    }
    let slope = 1.0 / n as f64;
    let mut points = Vec::with_capacity(prices.len());
    let mut max_dev = 0.0f64;
    for &p in prices {
        let pr = Price::new(p)?;
        pr.positive()?;
        let q_s = supply_quantity(market.supply(), pr);
        let q_d = per_household(q_s, n)?.value;
        let on_line = slope * q_s;
        max_dev = max_dev.max(relative(q_d - on_line, on_line));
        points.push(GridPoint { x: q_s, t: p, y: q_d });
    }
    Ok(CollapseReport {
        collapse: max_dev <= COLLAPSE_TOLERANCE,
        max_deviation: max_dev,
        line_slope: Some(slope),
        households: Some(n),
        points,
    })
}

/// Checks whether the iso-curves at `t_values` coincide with the first one.
pub fn isocurve_collapse_check<E>(
    eos: &E,
    t_values: &[f64],
    x_range: (f64, f64),
    n_points: usize,
) -> Result<CollapseReport>
where
    E: ConstraintSurface + Sync + ?Sized,
{
    let family = isocurves(eos, t_values, x_range, n_points)?;
    let reference = &family.curves[0];
    let mut max_dev = 0.0f64;
    let mut points = Vec::new();
    for (t, curve) in family.t_values.iter().zip(&family.curves) {
        for (p, r) in curve.iter().zip(reference) {
            max_dev = max_dev.max(relative(p.y - r.y, r.y));
            points.push(GridPoint { x: p.x, t: *t, y: p.y });
        }
    }
    Ok(CollapseReport {
        collapse: max_dev <= COLLAPSE_TOLERANCE,
        max_deviation: max_dev,
        line_slope: None,
        households: None,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::Config(format!("unknown export format `{other}`"))),
        }
    }
}

impl ExportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ExportFormat::Csv => "csv",
            ExportFormat::Json => "json",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Tabular data that can be exported as CSV or JSON.
pub trait Exportable: Serialize {
    fn csv_header(&self) -> [&'static str; 3];
    fn csv_rows(&self) -> Vec<[f64; 3]>;
}

impl Exportable for SurfaceGrid {
    fn csv_header(&self) -> [&'static str; 3] {
        ["x", "t", "y"]
    }

    fn csv_rows(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [p.x, p.t, p.y]).collect()
    }
}

impl Exportable for IsocurveFamily {
    fn csv_header(&self) -> [&'static str; 3] {
        ["t", "x", "y"]
    }

    fn csv_rows(&self) -> Vec<[f64; 3]> {
        self.t_values
            .iter()
            .zip(&self.curves)
            .flat_map(|(&t, c)| c.iter().map(move |p| [t, p.x, p.y]))
            .collect()
    }
}

impl Exportable for CollapseReport {
    fn csv_header(&self) -> [&'static str; 3] {
        ["t", "x", "y"]
    }

    fn csv_rows(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| [p.t, p.x, p.y]).collect()
    }
}

fn csv_error(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

pub fn write_export<T, W>(item: &T, format: ExportFormat, out: W) -> std::io::Result<()>
where
    T: Exportable + ?Sized,
    W: Write,
{
    match format {
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            w.write_record(item.csv_header()).map_err(csv_error)?;
            for row in item.csv_rows() {
                w.write_record(row.map(format_value)).map_err(csv_error)?;
            }
            w.flush()
        }
        ExportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, item).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
            out.flush()
        }
    }
}

/// Writes `item` to `path`. The parent directory must already exist.
pub fn export<T>(item: &T, format: ExportFormat, path: &Path) -> Result<()>
where
    T: Exportable + ?Sized,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_export(item, format, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::UnitaryEoS;
    use crate::reference_eos::{CurieParamagnetEoS, IdealGasEoS};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_market_eos() -> UnitaryEoS {
        UnitaryEoS::from_constant(1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new((1.0, 1.0), 2, (1.0, 2.0), 2).is_err());
        assert!(GridSpec::new((1.0, 2.0), 1, (1.0, 2.0), 2).is_err());
        assert!(GridSpec::new((1.0, 2.0), 2, (3.0, 2.0), 2).is_err());
        let g = GridSpec::new((1.0, 2.0), 3, (0.5, 1.0), 2).unwrap();
        assert_eq!(g.x_values(), vec![1.0, 1.5, 2.0]);
        assert_eq!(g.t_values(), vec![0.5, 1.0]);
    }

    #[test]
    fn linspace_ends_exactly() {
        let v: Vec<f64> = linspace(0.1, 0.7, 7).collect();
        assert_eq!(v[0], 0.1);
        assert_eq!(v[6], 0.7);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn unitary_corner_values() {
        let grid = GridSpec::new((1.0, 2.0), 2, (1.0, 2.0), 2).unwrap();
        let s = sample_surface(&unit_market_eos(), &grid).unwrap();
        assert_eq!(s.points.len(), 4);
        let ys: Vec<f64> = s.points.iter().map(|p| p.y).collect();
        assert_eq!(ys, vec![1.0, 2.0, 0.5, 1.0]);
        // t outer, x inner
        let xt: Vec<(f64, f64)> = s.points.iter().map(|p| (p.x, p.t)).collect();
        assert_eq!(xt, vec![(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (2.0, 2.0)]);
        assert_eq!(s.axes.x, "Q^s");
    }

    #[test]
    fn ideal_gas_surface_value() {
        let gas = IdealGasEoS::new(1.0).unwrap();
        let grid = GridSpec::new((0.024, 0.048), 2, (300.0, 600.0), 2).unwrap();
        let s = sample_surface(&gas, &grid).unwrap();
        assert!((s.points[0].y - 103925.0).abs() <= 0.5);
        assert!(audit_surface(&gas, &s).unwrap().pass);
    }

    #[test]
    fn domain_violation_names_the_point() {
        let gas = IdealGasEoS::new(1.0).unwrap();
        let grid = GridSpec::new((-1.0, 1.0), 3, (300.0, 600.0), 2).unwrap();
        let err = sample_surface(&gas, &grid).unwrap_err().to_string();
        assert!(err.contains("x=-1") && err.contains("t=300"), "{err}");
    }

    #[test]
    fn isocurve_examples() {
        let gas = IdealGasEoS::new(1.0).unwrap();
        let fam = isocurves(&gas, &[300.0, 600.0], (0.01, 0.1), 10).unwrap();
        assert_eq!(fam.curves.len(), 2);
        for (a, b) in fam.curves[0].iter().zip(&fam.curves[1]) {
            assert_eq!(a.x, b.x);
            assert_relative_eq!(b.y, 2.0 * a.y, max_relative = 1e-15);
        }

        let fam = isocurves(&unit_market_eos(), &[1.0], (0.0, 5.0), 6).unwrap();
        assert_eq!(fam.curves.len(), 1);
        assert!(fam.curves[0].iter().all(|p| p.x == p.y));

        assert!(isocurves(&gas, &[], (0.01, 0.1), 10).is_err());
        assert!(isocurves(&gas, &[300.0], (0.01, 0.1), 1).is_err());
    }

    #[test]
    fn isoprice_collapse_examples() {
        let m = MarketSpec::unitary(8.0, 2.0, 4).unwrap();
        let r = isoprice_collapse_check(&m, &[1.0, 2.0, 4.0, 8.0]).unwrap();
        assert!(r.collapse);
        assert_eq!(r.line_slope, Some(0.25));
        // distinct prices give distinct states along the one line
        let xs: Vec<f64> = r.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![2.0, 4.0, 8.0, 16.0]);

        let m1 = MarketSpec::unitary(8.0, 2.0, 1).unwrap();
        let r = isoprice_collapse_check(&m1, &[1.0, 3.0]).unwrap();
        assert_eq!(r.line_slope, Some(1.0));
        assert!(r.collapse);

        let lin = MarketSpec::linear(-2.0, 10.0, 3.0).unwrap();
        assert!(matches!(isoprice_collapse_check(&lin, &[1.0]), Err(Error::WrongFamily(_))));
        assert!(isoprice_collapse_check(&m, &[0.0]).is_err());
        assert!(isoprice_collapse_check(&m, &[]).is_err());
    }

    #[test]
    fn isotherms_do_not_collapse() {
        let gas = IdealGasEoS::new(1.0).unwrap();
        let r = isocurve_collapse_check(&gas, &[300.0, 600.0], (0.01, 0.1), 20).unwrap();
        assert!(!r.collapse);
        assert_relative_eq!(r.max_deviation, 1.0, max_relative = 1e-12);

        // the market surface's own isoprice lines are distinct too
        let r = isocurve_collapse_check(&unit_market_eos(), &[1.0, 2.0], (1.0, 2.0), 5).unwrap();
        assert!(!r.collapse);

        let r = isocurve_collapse_check(&gas, &[300.0], (0.01, 0.1), 5).unwrap();
        assert!(r.collapse);
    }

    #[test]
    fn csv_export_shape_and_round_trip() {
        let grid = GridSpec::new((1.0, 2.0), 2, (1.0, 2.0), 2).unwrap();
        let s = sample_surface(&UnitaryEoS::from_constant(0.3).unwrap(), &grid).unwrap();
        let mut buf = Vec::new();
        write_export(&s, ExportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "x,t,y");

        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for (rec, p) in rdr.records().zip(&s.points) {
            let rec = rec.unwrap();
            let vals: Vec<f64> = rec.iter().map(|f| f.parse().unwrap()).collect();
            assert_eq!(vals[0].to_bits(), p.x.to_bits());
            assert_eq!(vals[1].to_bits(), p.t.to_bits());
            assert_eq!(vals[2].to_bits(), p.y.to_bits());
        }
    }

    #[test]
    fn isocurve_csv_header() {
        let fam = isocurves(&CurieParamagnetEoS::new(1.0).unwrap(), &[1.0, 2.0], (0.0, 1.0), 3).unwrap();
        let mut buf = Vec::new();
        write_export(&fam, ExportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x,y\n"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn export_to_missing_directory_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing").join("s.csv");
        let grid = GridSpec::new((1.0, 2.0), 2, (1.0, 2.0), 2).unwrap();
        let s = sample_surface(&unit_market_eos(), &grid).unwrap();
        let err = export(&s, ExportFormat::Csv, &path).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        assert!(err.to_string().contains("missing"));
    }

    proptest! {
        #[test]
        fn format_value_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = format_value(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }

        #[test]
        fn collapse_for_random_unitary_markets(
            k_s in 0.01f64..100.0, k_d in 0.01f64..100.0, n in 1u64..10_000,
            prices in proptest::collection::vec(0.001f64..1000.0, 1..20),
        ) {
            let m = MarketSpec::unitary(k_s, k_d, n).unwrap();
            let r = isoprice_collapse_check(&m, &prices).unwrap();
            prop_assert!(r.collapse, "{}", r.max_deviation);
        }
    }
}
