use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Output directory that remembers what was written, for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Config(format!("option `--out`: cannot create {}: {e}", dir.display()))
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Creates `name` and hands a buffered writer to `write`.
    pub fn write<F>(&mut self, name: &str, write: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush()
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        self.write(name, |w| {
            w.write_all(body.as_bytes())
                .map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))
        })
    }

    /// Long-format CSV from a header and rows of already formatted fields.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        self.write(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            let io = |e: csv::Error| CliError::Io(format!("cannot write {name}: {e}"));
            c.write_record(header).map_err(io)?;
            for row in rows {
                c.write_record(row).map_err(io)?;
            }
            c.flush()
                .map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))
        })
    }

    /// Gnuplot script for a curve stored in a CSV file with a header.
    pub fn gnuplot_curve(&mut self, data: &str, x: usize, y: usize, xlabel: &str, ylabel: &str) -> Result<(), CliError> {
        let stem = data.trim_end_matches(".csv");
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset terminal pngcairo size 800,600\nset output '{stem}.png'\nplot '{data}' using {x}:{y} with linespoints\n"
        );
        self.text(&format!("{stem}.gp"), &script)
    }

    /// Gnuplot script for a map stored as gnuplot grid data.
    pub fn gnuplot_map(&mut self, data: &str, xlabel: &str, ylabel: &str) -> Result<(), CliError> {
        let stem = data.trim_end_matches(".dat");
        let script = format!(
            "set view map\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\nset terminal pngcairo size 800,700\nset output '{stem}.png'\nsplot '{data}' using 1:2:3 with pm3d notitle\n"
        );
        self.text(&format!("{stem}.gp"), &script)
    }

    /// Writes `manifest.toml` with run metadata and every resolved parameter.
    pub fn manifest<P: Serialize>(mut self, run: RunInfo<'_>, parameters: &P) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Manifest<'a, P> {
            tool: &'static str,
            version: &'static str,
            experiment: &'a str,
            config: String,
            gauge: String,
            threads: usize,
            outputs: Vec<String>,
            parameters: &'a P,
        }
        let m = Manifest {
            tool: "blochnet",
            version: env!("CARGO_PKG_VERSION"),
            experiment: run.experiment,
            config: run.config.display().to_string(),
            gauge: run.gauge.to_string(),
            threads: run.threads,
            outputs: std::mem::take(&mut self.files),
            parameters,
        };
        let body = toml::to_string(&m)
            .map_err(|e| CliError::Io(format!("cannot serialize manifest: {e}")))?;
        self.text("manifest.toml", &body)
    }
}

pub struct RunInfo<'a> {
    pub experiment: &'a str,
    pub config: &'a Path,
    pub gauge: blochnet::Gauge,
    pub threads: usize,
}
