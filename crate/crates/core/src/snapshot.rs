//! Line-oriented snapshot stream.
//!
//! ```text
//! tbsa-snapshots v1
//! stream run=3 digest=<sha256 hex> tileset=chessboard tile_width=0.03 tiles=92
//! snapshot step=1200 time=10
//! <id> <kind> <static 0|1> <x> <y> <angle> <vx> <vy> <omega>
//! ...
//! end
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a stream gives
//! back bit-identical states and re-analysis reproduces the original metrics.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::physics::TileState;
use crate::{Error, Result, Vec2};

const MAGIC: &str = "tbsa-snapshots v1";

#[derive(Clone, Debug, PartialEq)]
pub struct StreamHeader {
    pub run: u64,
    pub digest: String,
    pub tileset: String,
    pub tile_width: f64,
    pub tiles: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub run: u64,
    pub digest: String,
    pub step: u64,
    pub time: f64,
    pub tiles: Vec<TileState>,
}

pub struct SnapshotWriter<W: Write> {
    out: W,
    header: StreamHeader,
    line: String,
}

impl<W: Write> SnapshotWriter<W> {
    pub fn new(mut out: W, header: StreamHeader) -> std::io::Result<Self> {
        writeln!(out, "{MAGIC}")?;
        writeln!(
            out,
            "stream run={} digest={} tileset={} tile_width={} tiles={}",
            header.run, header.digest, header.tileset, header.tile_width, header.tiles
        )?;
        Ok(SnapshotWriter {
            out,
            header,
            line: String::new(),
        })
    }

    pub fn write(&mut self, step: u64, time: f64, tiles: &[TileState]) -> std::io::Result<()> {
        debug_assert_eq!(tiles.len(), self.header.tiles);
        writeln!(self.out, "snapshot step={step} time={time}")?;
        for (id, t) in tiles.iter().enumerate() {
            self.line.clear();
            // Writing into a String cannot fail.
            let _ = writeln!(
                self.line,
                "{id} {} {} {} {} {} {} {} {}",
                t.kind,
                t.is_static as u8,
                t.position.x,
                t.position.y,
                t.angle,
                t.velocity.x,
                t.velocity.y,
                t.angular_velocity
            );
            self.out.write_all(self.line.as_bytes())?;
        }
        writeln!(self.out, "end")
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn bad(line: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        line,
        reason: reason.into(),
    }
}

fn field<'a>(line_no: usize, token: Option<&'a str>, key: &str) -> Result<&'a str> {
    token
        .and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| bad(line_no, format!("expected `{key}=`")))
}

fn num<T: std::str::FromStr>(line_no: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| bad(line_no, format!("cannot parse number `{s}`")))
}

/// Reads a whole stream: its header and every snapshot block.
pub fn read_stream<R: BufRead>(input: R) -> Result<(StreamHeader, Vec<Snapshot>)> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = move || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((n, Ok(l))) => Ok(Some((n, l))),
            Some((n, Err(e))) => Err(bad(n, e.to_string())),
        }
    };

    match next()? {
        Some((_, l)) if l.trim() == MAGIC => {}
        Some((n, _)) => return Err(bad(n, "missing stream magic")),
        None => return Err(bad(0, "empty stream")),
    }
    let (n, l) = next()?.ok_or_else(|| bad(1, "missing stream header"))?;
    let mut tok = l.split_whitespace();
    if tok.next() != Some("stream") {
        return Err(bad(n, "expected `stream` header"));
    }
    let header = StreamHeader {
        run: num(n, field(n, tok.next(), "run")?)?,
        digest: field(n, tok.next(), "digest")?.to_string(),
        tileset: field(n, tok.next(), "tileset")?.to_string(),
        tile_width: num(n, field(n, tok.next(), "tile_width")?)?,
        tiles: num(n, field(n, tok.next(), "tiles")?)?,
    };

    let mut snapshots = Vec::new();
    while let Some((n, l)) = next()? {
        if l.trim().is_empty() {
            continue;
        }
        let mut tok = l.split_whitespace();
        if tok.next() != Some("snapshot") {
            return Err(bad(n, "expected `snapshot`"));
        }
        let step = num(n, field(n, tok.next(), "step")?)?;
        let time = num(n, field(n, tok.next(), "time")?)?;
        let mut tiles = Vec::with_capacity(header.tiles);
        loop {
            let (n, l) = next()?.ok_or_else(|| bad(n, "unterminated snapshot"))?;
            if l.trim() == "end" {
                break;
            }
            let cols: Vec<&str> = l.split_whitespace().collect();
            if cols.len() != 9 {
                return Err(bad(n, format!("expected 9 columns, got {}", cols.len())));
            }
            let id: usize = num(n, cols[0])?;
            if id != tiles.len() {
                return Err(bad(n, format!("tile id {id} out of order")));
            }
            let f = |k: usize| num::<f64>(n, cols[k]);
            tiles.push(TileState {
                kind: num(n, cols[1])?,
                is_static: match cols[2] {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(n, format!("bad static flag `{other}`"))),
                },
                position: Vec2::new(f(3)?, f(4)?),
                angle: f(5)?,
                velocity: Vec2::new(f(6)?, f(7)?),
                angular_velocity: f(8)?,
            });
        }
        if tiles.len() != header.tiles {
            return Err(bad(n, format!("snapshot has {} tiles, header says {}", tiles.len(), header.tiles)));
        }
        snapshots.push(Snapshot {
            run: header.run,
            digest: header.digest.clone(),
            step,
            time,
            tiles,
        });
    }
    Ok((header, snapshots))
}
