"""treepack のスクリプト入口。python main.py <subcommand> ... で treepack.cli を呼ぶ。"""

from treepack.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
