package main

import (
	"fmt"
	"strconv"
)

func main() {
	var port int = "8080"
	next := port + 1
	fmt.Println(strconv.Itoa(next))
}
