from iaps.cli import main

raise SystemExit(main())
