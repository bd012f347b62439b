//! CSV and JSON encodings of command results. Everything is rendered in
//! memory and written once, so identical runs give identical files.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;

use abdisk::spectra::{
    ABSpectrum, MeshLevel, SpectrumSequence, SweepResult, Variant, DOUBLE_FACTOR,
};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

pub const BESSEL_HEADER: &str = "k,z,lambda";
pub const SWEEP_HEADER: &str = "t,lam1_nd,lam1_dn,lam2_nd,lam2_dn,lam1,lam2,gap,\
res1_nd,res1_dn,res2_nd,res2_dn,lam1_tag,lam2_tag";

/// Full double precision: 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn spectrum_header(levels: &[MeshLevel]) -> String {
    let mut h = String::from("j,lambda_extrapolated,provenance,residual,double");
    for (b, g) in levels {
        write!(h, ",level_{b}_{g}").unwrap();
    }
    h
}

fn split_header(h: &str) -> Vec<String> {
    h.split(',').map(str::to_string).collect()
}

pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct BesselRow {
    k: usize,
    z: f64,
    lambda: f64,
}

#[derive(Serialize)]
struct BesselDoc {
    twice_order: u32,
    rows: Vec<BesselRow>,
}

#[derive(Serialize)]
struct SpectrumRow {
    j: usize,
    lambda_extrapolated: f64,
    provenance: Variant,
    residual: f64,
    double: bool,
    per_level: Vec<f64>,
}

#[derive(Serialize)]
struct SpectrumDoc<'a> {
    t: f64,
    mode: &'a str,
    levels: &'a [MeshLevel],
    rows: Vec<SpectrumRow>,
}

pub struct Output {
    format: Format,
    path: Option<PathBuf>,
}

impl Output {
    pub fn new(format: Format, path: Option<PathBuf>) -> Self {
        Self { format, path }
    }

    fn emit(&self, text: String) -> Result<()> {
        write_bytes(self.path.as_deref(), text.as_bytes())
    }

    fn emit_csv(&self, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        write_bytes(self.path.as_deref(), &w.into_inner()?)
    }

    fn emit_json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.emit(text)
    }

    pub fn bessel(&self, twice_order: u32, zeros: &[f64]) -> Result<()> {
        let rows: Vec<BesselRow> = zeros
            .iter()
            .enumerate()
            .map(|(i, &z)| BesselRow {
                k: i + 1,
                z,
                lambda: z * z,
            })
            .collect();
        match self.format {
            Format::Json => self.emit_json(&BesselDoc { twice_order, rows }),
            Format::Csv => self.emit_csv(
                &split_header(BESSEL_HEADER),
                rows.iter()
                    .map(|r| vec![r.k.to_string(), num(r.z), num(r.lambda)])
                    .collect(),
            ),
        }
    }

    pub fn single_spectrum(&self, seq: &SpectrumSequence, levels: &[MeshLevel]) -> Result<()> {
        let n = seq.extrapolated.len();
        let double = |j: usize| {
            let near = |i: usize| {
                (seq.extrapolated[i] - seq.extrapolated[j]).abs()
                    <= DOUBLE_FACTOR * (seq.residuals[i] + seq.residuals[j])
            };
            (j > 0 && near(j - 1)) || (j + 1 < n && near(j + 1))
        };
        let rows = (0..n)
            .map(|j| SpectrumRow {
                j: j + 1,
                lambda_extrapolated: seq.extrapolated[j],
                provenance: seq.spec.variant,
                residual: seq.residuals[j],
                double: double(j),
                per_level: seq.levels.iter().map(|l| l.values[j]).collect(),
            })
            .collect();
        let mode = seq.spec.variant.to_string();
        self.spectrum_rows(seq.spec.t, &mode, levels, rows)
    }

    pub fn merged_spectrum(&self, ab: &ABSpectrum, levels: &[MeshLevel]) -> Result<()> {
        let rows = ab
            .entries
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let seq = match e.provenance {
                    Variant::DN => &ab.dn,
                    Variant::ND => &ab.nd,
                };
                SpectrumRow {
                    j: j + 1,
                    lambda_extrapolated: e.lambda,
                    provenance: e.provenance,
                    residual: e.residual,
                    double: e.double_with.is_some(),
                    per_level: seq.levels.iter().map(|l| l.values[e.index]).collect(),
                }
            })
            .collect();
        self.spectrum_rows(ab.t, "merged", levels, rows)
    }

    fn spectrum_rows(
        &self,
        t: f64,
        mode: &str,
        levels: &[MeshLevel],
        rows: Vec<SpectrumRow>,
    ) -> Result<()> {
        match self.format {
            Format::Json => self.emit_json(&SpectrumDoc {
                t,
                mode,
                levels,
                rows,
            }),
            Format::Csv => self.emit_csv(
                &split_header(&spectrum_header(levels)),
                rows.iter()
                    .map(|r| {
                        let mut cells = vec![
                            r.j.to_string(),
                            num(r.lambda_extrapolated),
                            r.provenance.to_string(),
                            num(r.residual),
                            r.double.to_string(),
                        ];
                        cells.extend(r.per_level.iter().map(|&v| num(v)));
                        cells
                    })
                    .collect(),
            ),
        }
    }

    /// CSV carries the points; the verdict block then goes to stderr as JSON.
    pub fn sweep(&self, result: &SweepResult) -> Result<()> {
        match self.format {
            Format::Json => self.emit_json(result),
            Format::Csv => {
                let rows = result
                    .points
                    .iter()
                    .map(|p| {
                        let values = [
                            p.t, p.lam1_nd, p.lam1_dn, p.lam2_nd, p.lam2_dn, p.lam1, p.lam2, p.gap,
                            p.res1_nd, p.res1_dn, p.res2_nd, p.res2_dn,
                        ];
                        let mut cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
                        cells.push(p.lam1_tag.to_string());
                        cells.push(p.lam2_tag.to_string());
                        cells
                    })
                    .collect();
                self.emit_csv(&split_header(SWEEP_HEADER), rows)?;
                eprintln!("{}", serde_json::to_string(&result.verdict)?);
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, 5.783185962946784, 1e-300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn headers() {
        assert_eq!(
            spectrum_header(&[(4, 4), (5, 6)]),
            "j,lambda_extrapolated,provenance,residual,double,level_4_4,level_5_6"
        );
        assert_eq!(SWEEP_HEADER.split(',').count(), 14);
    }
}
