"""Cost-model workbench for compiler optimizations on zkVM-style RISC-V guests."""

__version__ = "0.1.0"
