import sys

from . import build_cassettes

if __name__ == "__main__":
    for path in build_cassettes(sys.argv[1] if len(sys.argv) > 1 else None):
        print(path)
