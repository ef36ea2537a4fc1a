from mean_field_dml.cli import main


if __name__ == "__main__":
    raise SystemExit(main())
