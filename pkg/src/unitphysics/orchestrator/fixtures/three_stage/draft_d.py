print("see the mechanism notes")
