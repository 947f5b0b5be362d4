fn main() {
    // System OpenBLAS bundles LAPACK (zheevd_, dsyev_, zgemm_).
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
