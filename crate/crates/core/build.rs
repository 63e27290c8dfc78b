fn main() {
    // system OpenBLAS bundles LAPACK (dgetrf/dgecon/dgetrs/dsyev)
    println!("cargo:rustc-link-lib=dylib=openblas");
}
