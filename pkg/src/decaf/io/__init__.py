from decaf.io.structure import ELEMENTS, Structure
from decaf.io.xyz import parse_xyz, read_xyz, write_xyz

__all__ = ["ELEMENTS", "Structure", "parse_xyz", "read_xyz", "write_xyz"]
