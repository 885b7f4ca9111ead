//! Regular 2D grids of values at cell centers, used both as inputs
//! (reference fields, source tables) and as solver outputs.
//!
//! Text format: a header line `nx ny channels xmin ymin xmax ymax`, then
//! whitespace-separated values, row-major with channels interleaved. The
//! binary variant repeats the header line and follows it with
//! little-endian `f32` values.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vector::Vector;

type V2<T> = Vector<T, 2>;

#[derive(Clone, Debug, PartialEq)]
pub struct GridField<T> {
    nx: usize,
    ny: usize,
    channels: usize,
    lo: V2<T>,
    hi: V2<T>,
    values: Vec<T>,
}

impl<T: Real> GridField<T> {
    pub fn new(nx: usize, ny: usize, channels: usize, lo: V2<T>, hi: V2<T>, values: Vec<T>) -> Result<Self> {
        if nx == 0 || ny == 0 || channels == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if !(hi.x() > lo.x() && hi.y() > lo.y()) {
            return Err(Error::Config("grid bounding box is empty".into()));
        }
        if values.len() != nx * ny * channels {
            return Err(Error::Config(format!(
                "grid expects {} values, got {}",
                nx * ny * channels,
                values.len()
            )));
        }
        Ok(Self { nx, ny, channels, lo, hi, values })
    }

    pub fn zeros(nx: usize, ny: usize, channels: usize, lo: V2<T>, hi: V2<T>) -> Result<Self> {
        Self::new(nx, ny, channels, lo, hi, vec![T::zero(); nx * ny * channels])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bounds(&self) -> (V2<T>, V2<T>) {
        (self.lo, self.hi)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cell_size(&self) -> V2<T> {
        V2::new((self.hi.x() - self.lo.x()) / T::count(self.nx), (self.hi.y() - self.lo.y()) / T::count(self.ny))
    }

    pub fn center(&self, i: usize, j: usize) -> V2<T> {
        let h = self.cell_size();
        let half = T::lit(0.5);
        V2::new(self.lo.x() + (T::count(i) + half) * h.x(), self.lo.y() + (T::count(j) + half) * h.y())
    }

    /// Cell centers in storage order.
    pub fn centers(&self) -> Vec<V2<T>> {
        (0..self.ny).flat_map(|j| (0..self.nx).map(move |i| (i, j))).map(|(i, j)| self.center(i, j)).collect()
    }

    pub fn get(&self, i: usize, j: usize, c: usize) -> T {
        self.values[(j * self.nx + i) * self.channels + c]
    }

    pub fn set(&mut self, i: usize, j: usize, c: usize, v: T) {
        self.values[(j * self.nx + i) * self.channels + c] = v;
    }

    /// Values of one channel in storage order.
    pub fn channel(&self, c: usize) -> Vec<T> {
        self.values.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Continuous cell coordinates of `x`, clamped to the centers.
    fn locate(&self, x: &V2<T>) -> (usize, usize, T, T) {
        let h = self.cell_size();
        let half = T::lit(0.5);
        let axis = |v: T, lo: T, h: T, n: usize| {
            let s = ((v - lo) / h - half).max(T::zero()).min(T::count(n - 1));
            let i = s.floor().to_usize().unwrap_or(0).min(n.saturating_sub(2));
            (i, s - T::count(i))
        };
        let (i, fx) = axis(x.x(), self.lo.x(), h.x(), self.nx);
        let (j, fy) = axis(x.y(), self.lo.y(), h.y(), self.ny);
        (i, j, fx, fy)
    }

    fn corner(&self, i: usize, j: usize, c: usize) -> T {
        self.get(i.min(self.nx - 1), j.min(self.ny - 1), c)
    }

    /// Bilinear interpolation between cell centers, constant beyond them.
    pub fn sample(&self, x: &V2<T>, c: usize) -> T {
        let (i, j, fx, fy) = self.locate(x);
        let v00 = self.corner(i, j, c);
        let v10 = self.corner(i + 1, j, c);
        let v01 = self.corner(i, j + 1, c);
        let v11 = self.corner(i + 1, j + 1, c);
        let one = T::one();
        (v00 * (one - fx) + v10 * fx) * (one - fy) + (v01 * (one - fx) + v11 * fx) * fy
    }

    /// Spatial gradient of [`GridField::sample`] (piecewise).
    pub fn gradient(&self, x: &V2<T>, c: usize) -> V2<T> {
        let (i, j, fx, fy) = self.locate(x);
        let h = self.cell_size();
        let v00 = self.corner(i, j, c);
        let v10 = self.corner(i + 1, j, c);
        let v01 = self.corner(i, j + 1, c);
        let v11 = self.corner(i + 1, j + 1, c);
        let one = T::one();
        let dx = ((v10 - v00) * (one - fy) + (v11 - v01) * fy) / h.x();
        let dy = ((v01 - v00) * (one - fx) + (v11 - v10) * fx) / h.y();
        V2::new(if self.nx > 1 { dx } else { T::zero() }, if self.ny > 1 { dy } else { T::zero() })
    }

    fn header(&self) -> String {
        format!(
            "{} {} {} {} {} {} {}",
            self.nx,
            self.ny,
            self.channels,
            self.lo.x(),
            self.lo.y(),
            self.hi.x(),
            self.hi.y()
        )
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        let row = self.nx * self.channels;
        for chunk in self.values.chunks(row) {
            let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.header())?;
        for v in &self.values {
            w.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
        Ok(())
    }

    fn parse_header(line: &str) -> Result<(usize, usize, usize, V2<T>, V2<T>)> {
        let err = |msg: String| Error::Parse { line: 1, msg };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 7 {
            return Err(err(format!("header needs 7 fields, found {}", parts.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad integer {s:?}: {e}")));
        let real = |s: &str| s.parse::<f64>().map(T::lit).map_err(|e| err(format!("bad number {s:?}: {e}")));
        Ok((
            int(parts[0])?,
            int(parts[1])?,
            int(parts[2])?,
            V2::new(real(parts[3])?, real(parts[4])?),
            V2::new(real(parts[5])?, real(parts[6])?),
        ))
    }

    fn from_parts(header: (usize, usize, usize, V2<T>, V2<T>), values: Vec<T>) -> Result<Self> {
        let (nx, ny, ch, lo, hi) = header;
        let expected = nx * ny * ch;
        if values.len() != expected {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {expected} values, payload has {}", values.len()),
            });
        }
        Self::new(nx, ny, ch, lo, hi, values).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or(Error::Parse { line: 1, msg: "empty grid file".into() })??;
        let header = Self::parse_header(&first)?;
        let mut values = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            for tok in line.split_whitespace() {
                let v = tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: k + 2,
                    msg: format!("bad number {tok:?}: {e}"),
                })?;
                values.push(T::lit(v));
            }
        }
        Self::from_parts(header, values)
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(Error::Parse { line: 1, msg: "missing header line".into() })?;
        let first = std::str::from_utf8(&bytes[..nl]).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        let header = Self::parse_header(first)?;
        let payload = &bytes[nl + 1..];
        if payload.len() % 4 != 0 {
            return Err(Error::Parse { line: 2, msg: "binary payload is not a whole number of f32".into() });
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        Self::from_parts(header, values)
    }

    /// Reads a grid file; `.bin` selects the binary variant.
    pub fn read_path(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if is_binary(path) {
            Self::read_binary(file)
        } else {
            Self::read_text(file)
        }
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut w = std::io::BufWriter::new(file);
        if is_binary(path) {
            self.write_binary(&mut w)?;
        } else {
            self.write_text(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "bin")
}
