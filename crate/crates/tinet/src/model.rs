use crate::error::{Error, Result};
use crate::stencil::MatrixStencil;

/// A translation-invariant network in state-space form: four stencils
/// (A, B, C, D) with shapes n x n, n x m, r x n, r x m on a shared lattice.
///
/// The network evolves as x' = A x + B u, y = C x + D u where each of the
/// four operators is block Toeplitz over Z^nu.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    a: MatrixStencil,
    b: MatrixStencil,
    c: MatrixStencil,
    d: MatrixStencil,
}

impl NetworkModel {
    pub fn new(
        a: MatrixStencil,
        b: MatrixStencil,
        c: MatrixStencil,
        d: MatrixStencil,
    ) -> Result<Self> {
        let nu = a.dim_nu();
        for (name, s) in [("b", &b), ("c", &c), ("d", &d)] {
            if s.dim_nu() != nu {
                return Err(Error::InvalidArgument(format!(
                    "stencil {name} has lattice dimension {}, expected {nu}",
                    s.dim_nu()
                )));
            }
        }
        if a.rows() != a.cols() {
            return Err(Error::InvalidArgument(format!(
                "state stencil must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let m = b.cols();
        let r = c.rows();
        if b.rows() != n {
            return Err(Error::DimensionMismatch { what: "b rows", expected: n, got: b.rows() });
        }
        if c.cols() != n {
            return Err(Error::DimensionMismatch { what: "c cols", expected: n, got: c.cols() });
        }
        if d.rows() != r {
            return Err(Error::DimensionMismatch { what: "d rows", expected: r, got: d.rows() });
        }
        if d.cols() != m {
            return Err(Error::DimensionMismatch { what: "d cols", expected: m, got: d.cols() });
        }
        Ok(Self { a, b, c, d })
    }

    /// A model with only state dynamics; B, C, D are zero with the given
    /// input and output dimensions.
    pub fn autonomous(a: MatrixStencil, input_dim: usize, output_dim: usize) -> Result<Self> {
        let nu = a.dim_nu();
        let n = a.rows();
        let b = MatrixStencil::new(nu, n, input_dim)?;
        let c = MatrixStencil::new(nu, output_dim, n)?;
        let d = MatrixStencil::new(nu, output_dim, input_dim)?;
        Self::new(a, b, c, d)
    }

    pub fn dim_nu(&self) -> usize {
        self.a.dim_nu()
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    pub fn a(&self) -> &MatrixStencil {
        &self.a
    }

    pub fn b(&self) -> &MatrixStencil {
        &self.b
    }

    pub fn c(&self) -> &MatrixStencil {
        &self.c
    }

    pub fn d(&self) -> &MatrixStencil {
        &self.d
    }
}
