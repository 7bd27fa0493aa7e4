//! Text formatting shared by event descriptions, prompts and reports.

use crate::world::{BlockPos, Items};

/// Minimal-digit rendering of a real rounded to three decimals:
/// `-51.0` prints as `-51`, `-4.5510001` as `-4.551`.
pub fn real(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    // -0 prints as "-0"
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r}")
}

/// `[x, y, z]` with minimal-digit reals.
pub fn point(p: [f64; 3]) -> String {
    format!("[{}, {}, {}]", real(p[0]), real(p[1]), real(p[2]))
}

/// Python-dict style: `{'diamond': 1, 'stick': 2}`, or `{}`.
pub fn items(items: &Items) -> String {
    let body: Vec<String> = items.iter().map(|(k, v)| format!("'{k}': {v}")).collect();
    format!("{{{}}}", body.join(", "))
}

pub fn pos(p: BlockPos) -> String {
    p.to_string()
}

struct Spaced;

impl serde_json::ser::Formatter for Spaced {
    fn begin_array_value<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_key<W: ?Sized + std::io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        w.write_all(b": ")
    }
}

/// Single-line JSON with a space after `,` and `:`, e.g. `{"diamond": 1}`.
pub fn json_line<T: serde::Serialize + ?Sized>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Spaced);
    v.serialize(&mut ser).expect("in-memory JSON serialization");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}
