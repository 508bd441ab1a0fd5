//! Parameter and multiply-accumulate accounting per layer.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerReport {
    pub name: String,
    pub params: usize,
    /// Multiply-accumulates for one sample's forward pass.
    pub macs: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkReport {
    pub layers: Vec<LayerReport>,
}

impl NetworkReport {
    pub fn push(&mut self, layer: LayerReport) {
        self.layers.push(layer);
    }

    pub fn extend(&mut self, other: NetworkReport) {
        self.layers.extend(other.layers);
    }

    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.params).sum()
    }

    pub fn total_macs(&self) -> usize {
        self.layers.iter().map(|l| l.macs).sum()
    }

    /// Sums over layers whose name starts with `prefix`.
    pub fn macs_with_prefix(&self, prefix: &str) -> usize {
        self.layers
            .iter()
            .filter(|l| l.name.starts_with(prefix))
            .map(|l| l.macs)
            .sum()
    }
}

impl std::fmt::Display for NetworkReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<28} {:>12} {:>14}", "layer", "params", "macs")?;
        for l in &self.layers {
            writeln!(f, "{:<28} {:>12} {:>14}", l.name, l.params, l.macs)?;
        }
        write!(f, "{:<28} {:>12} {:>14}", "total", self.total_params(), self.total_macs())
    }
}
