//! CSV and WAV readers and writers.
//!
//! CSV files carry a header line and one sample (or matrix row) per line.
//! Floats are written in scientific notation with 17 significant digits so
//! they round-trip exactly.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use ccs_ica::SignalMatrix;
use ndarray::Array2;

use crate::error::{CliError, CliResult};

pub const WAV_SAMPLE_RATE: u32 = 8000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Csv,
    Wav,
}

impl SignalFormat {
    pub fn of_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("wav") => SignalFormat::Wav,
            _ => SignalFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            SignalFormat::Csv => "csv",
            SignalFormat::Wav => "wav",
        }
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Writes a header and string rows.
pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a numeric CSV: returns the header and a `rows × columns` array.
pub fn read_numeric_csv(path: &Path) -> CliResult<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_owned)
        .collect();
    let cols = header.len();
    let mut flat = Vec::new();
    let mut rows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        if rec.len() != cols {
            return Err(CliError::io(
                path,
                format!("line {}: expected {cols} fields", line + 2),
            ));
        }
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CliError::io(path, format!("line {}: '{field}' is not a number", line + 2)))?;
            flat.push(v);
        }
        rows += 1;
    }
    let data = Array2::from_shape_vec((rows, cols), flat).map_err(|e| CliError::io(path, e))?;
    Ok((header, data))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> CliResult<()> {
    let header = (0..m.ncols()).map(|j| format!("c{j}")).collect::<Vec<_>>();
    let rows = m
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| fmt_f64(v)).collect());
    write_csv(path, &header, rows)
}

pub fn read_matrix(path: &Path) -> CliResult<Array2<f64>> {
    let (_, m) = read_numeric_csv(path)?;
    if m.nrows() == 0 {
        return Err(CliError::io(path, "matrix file has no rows"));
    }
    Ok(m)
}

/// Writes equal-length channels as CSV columns named `{prefix}{index}`.
pub fn write_channels_csv(path: &Path, channels: &[Vec<f64>], prefix: &str) -> CliResult<()> {
    let header = (0..channels.len())
        .map(|m| format!("{prefix}{m}"))
        .collect::<Vec<_>>();
    let samples = channels.first().map_or(0, Vec::len);
    let rows = (0..samples).map(|t| channels.iter().map(|c| fmt_f64(c[t])).collect());
    write_csv(path, &header, rows)
}

pub fn write_signals_csv(path: &Path, s: &SignalMatrix<f64>, prefix: &str) -> CliResult<()> {
    let channels: Vec<Vec<f64>> = s.data().rows().into_iter().map(|r| r.to_vec()).collect();
    write_channels_csv(path, &channels, prefix)
}

/// Writes one channel as 8 kHz mono 16-bit PCM. Returns the number of
/// samples outside `[−1, 1)` that were clipped.
pub fn write_wav(path: &Path, samples: &[f64]) -> CliResult<usize> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: WAV_SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| CliError::io(path, e))?;
    let mut clipped = 0;
    for &v in samples {
        let scaled = (v * 32768.0).round();
        if !(-32768.0..=32767.0).contains(&scaled) {
            clipped += 1;
        }
        w.write_sample(scaled.clamp(-32768.0, 32767.0) as i16)
            .map_err(|e| CliError::io(path, e))?;
    }
    w.finalize().map_err(|e| CliError::io(path, e))?;
    if clipped > 0 {
        eprintln!(
            "warning: {}: clipped {clipped} samples outside [-1, 1)",
            path.display()
        );
    }
    Ok(clipped)
}

/// Reads every channel of a WAV file, normalized to `[−1, 1)`.
pub fn read_wav(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut r = hound::WavReader::open(path).map_err(|e| CliError::io(path, e))?;
    let spec = r.spec();
    let channels = spec.channels as usize;
    let flat: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Int => {
            let full_scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            r.samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / full_scale))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::io(path, e))?
        }
        hound::SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::io(path, e))?,
    };
    let mut out = vec![Vec::with_capacity(flat.len() / channels.max(1)); channels];
    for (k, v) in flat.into_iter().enumerate() {
        out[k % channels].push(v);
    }
    Ok(out)
}

/// Concatenates the channels of several CSV / WAV files.
pub fn read_channels(paths: &[PathBuf]) -> CliResult<Vec<Vec<f64>>> {
    if paths.is_empty() {
        return Err(CliError::invalid("no input signal files given"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for path in paths {
        match SignalFormat::of_path(path) {
            SignalFormat::Wav => rows.extend(read_wav(path)?),
            SignalFormat::Csv => {
                let (_, table) = read_numeric_csv(path)?;
                rows.extend(table.columns().into_iter().map(|c| c.to_vec()));
            }
        }
    }
    let len = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != len) {
        return Err(CliError::invalid(format!(
            "channel {bad} has {} samples, channel 0 has {len}",
            rows[bad].len()
        )));
    }
    Ok(rows)
}

/// [`read_channels`] as a signal matrix (at least two channels).
pub fn read_signals(paths: &[PathBuf]) -> CliResult<SignalMatrix<f64>> {
    Ok(SignalMatrix::from_rows(&read_channels(paths)?)?)
}

/// Writes a signal matrix either as a single CSV file or, for WAV, one
/// mono file per channel named `{stem}_{m}.wav`. Returns the written paths.
pub fn write_signals(
    dir: &Path,
    stem: &str,
    s: &SignalMatrix<f64>,
    format: SignalFormat,
    prefix: &str,
) -> CliResult<Vec<PathBuf>> {
    ensure_dir(dir)?;
    match format {
        SignalFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            write_signals_csv(&path, s, prefix)?;
            Ok(vec![path])
        }
        SignalFormat::Wav => (0..s.channels())
            .map(|m| {
                let path = dir.join(format!("{stem}_{m}.wav"));
                write_wav(&path, &s.row(m).to_vec())?;
                Ok(path)
            })
            .collect(),
    }
}
