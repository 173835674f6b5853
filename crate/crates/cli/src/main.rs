fn main() {
    println!("bigraded workbench");
}
