"""High-level synthesis of concurrent ConPro-style programs to μCODE, RTL and VHDL."""
__version__ = "0.1.0"
