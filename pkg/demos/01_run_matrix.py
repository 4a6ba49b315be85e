"""
Expanding a build matrix
========================

Two distributions, two MPI stacks, CPU and GPU builds -- but GPU code is only
tested on Debian. The exclusion rule trims the 8-point Cartesian product.
"""
from benchkeeper.specmatrix import expand, format_configurations, parse_spec, render_command

text = """
benchmark "build-matrix"
param distro = rocky9, debian12
param mpi = mpich, openmpi
param device = cpu, gpu
exclude device=gpu && distro=rocky9
command = "make DEVICE={device} MPI={mpi} && ./run.sh"
metric elapsed from elapsed
estimate_seconds = 900
"""

spec = parse_spec(text)
configs = expand(spec)
print(f"{len(configs)} configurations (timeout {spec.timeout_seconds} s each)")
print(format_configurations(configs), end="")

# every configuration renders to a concrete shell command
for c in configs[:2]:
    print(render_command(spec, c))
