from irqueue.cli import main

raise SystemExit(main())
