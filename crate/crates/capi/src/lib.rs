// C ABI surface; filled in after the core stabilizes.
